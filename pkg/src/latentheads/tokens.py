"""Dense token representations fed to the context encoder.

Baseline mode concatenates word and POS-tag embeddings; the alternative
replaces the POS part with a character-level summary of the word. During
training, word vectors are swapped for the unknown vector with probability
alpha / (count + alpha), so rare words train the unknown representation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .conll import Sentence, Vocabulary
from .errors import ConfigurationError, InvalidInputError, UsageError

MODES = ("word+pos", "word+char")


@dataclass
class EncoderConfig:
    word_dim: int = 150
    pos_dim: int = 50
    alpha_word_dropout: float = 0.25
    mode: str = "word+pos"
    char_dim: int = 25          # per-character embedding size
    char_hidden: int = 50       # per direction; both finals are projected down

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown encoder mode {self.mode!r}")
        for name in ("word_dim", "pos_dim", "char_dim", "char_hidden"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.alpha_word_dropout < 0:
            raise ConfigurationError("alpha_word_dropout must be non-negative")


def drop_probability(word_count: int, alpha: float) -> float:
    """Chance of replacing a word by the unknown vector: alpha / (count + alpha)."""
    if word_count < 0:
        raise InvalidInputError("word_count must be non-negative")
    if alpha == 0:
        return 0.0
    return alpha / (word_count + alpha)


class EmbeddingTable:
    """Vocabulary-indexed rows of a trainable matrix."""

    def __init__(self, vocab: Vocabulary, dim: int, rng: np.random.Generator):
        self.vocab = vocab
        self.dim = dim
        self.vectors = nn.Parameter(rng.uniform(-0.05, 0.05, size=(len(vocab), dim)))
        self.unknown_index = vocab.unknown_index

    def lookup(self, symbol: str | None) -> nn.Tensor:
        return nn.row(self.vectors, self.vocab.index_of(symbol))

    def lookup_index(self, index: int) -> nn.Tensor:
        return nn.row(self.vectors, index)

    def named_parameters(self, prefix: str = ""):
        yield prefix + "vectors", self.vectors


class CharEncoder:
    """Fixed-size word summary from a character-level bidirectional pass."""

    def __init__(self, char_vocab: Vocabulary, cfg: EncoderConfig, out_dim: int,
                 rng: np.random.Generator):
        self.char_table = EmbeddingTable(char_vocab, cfg.char_dim, rng)
        self.char_birnn = nn.BiEncoder(cfg.char_dim, cfg.char_hidden, rng)
        self.projection = nn.DenseLayer(2 * cfg.char_hidden, out_dim, "identity", rng)
        self.out_dim = out_dim

    def encode(self, word: str) -> nn.Tensor:
        if not word:
            return nn.zeros(self.out_dim)
        chars = [self.char_table.lookup(ch) for ch in word]
        _, final_fwd, final_rev = self.char_birnn.encode_with_finals(chars)
        return self.projection(nn.concat((final_fwd, final_rev)))

    def named_parameters(self, prefix: str = ""):
        yield from self.char_table.named_parameters(prefix + "chars.")
        yield from self.char_birnn.named_parameters(prefix + "birnn.")
        yield from self.projection.named_parameters(prefix + "projection.")


def char_vocab_from_words(word_vocab: Vocabulary) -> Vocabulary:
    chars = sorted({ch for w in word_vocab.symbols if w != word_vocab.unknown for ch in w})
    return Vocabulary(chars)


class TokenEncoder:
    """Turns a sentence into the embedding sequence e_1..e_n.

    Input POS features come strictly from the externally predicted tag; a
    token without one uses the unknown POS vector. Gold tags are training
    targets elsewhere, never input features.
    """

    def __init__(self, word_vocab: Vocabulary, pos_vocab: Vocabulary,
                 config: EncoderConfig, rng: np.random.Generator):
        config.validate()
        self.config = config
        self.word_vocab = word_vocab
        self.pos_vocab = pos_vocab
        self.word_table = EmbeddingTable(word_vocab, config.word_dim, rng)
        self.pos_table = None
        self.char_encoder = None
        if config.mode == "word+pos":
            self.pos_table = EmbeddingTable(pos_vocab, config.pos_dim, rng)
        else:
            self.char_encoder = CharEncoder(char_vocab_from_words(word_vocab),
                                            config, config.pos_dim, rng)

    @property
    def output_size(self) -> int:
        return self.config.word_dim + self.config.pos_dim

    def _word_vector(self, form: str, training: bool,
                     rng: np.random.Generator | None) -> nn.Tensor:
        key = form.lower()
        index = self.word_vocab.index_of(key)
        if training:
            if rng is None:
                raise UsageError("training-time encoding needs a random generator for dropout")
            p = drop_probability(self.word_vocab.count(key), self.config.alpha_word_dropout)
            if p > 0.0 and rng.random() < p:
                index = self.word_vocab.unknown_index
        return self.word_table.lookup_index(index)

    def encode(self, sentence: Sentence, training: bool = False,
               rng: np.random.Generator | None = None) -> list[nn.Tensor]:
        if not sentence.tokens:
            raise InvalidInputError("cannot encode an empty sentence")
        out = []
        for tok in sentence.tokens:
            word_vec = self._word_vector(tok.form, training, rng)
            if self.pos_table is not None:
                other = self.pos_table.lookup(tok.predicted_pos)
            else:
                other = self.char_encoder.encode(tok.form)
            out.append(nn.concat((word_vec, other)))
        return out

    def named_parameters(self, prefix: str = ""):
        yield from self.word_table.named_parameters(prefix + "words.")
        if self.pos_table is not None:
            yield from self.pos_table.named_parameters(prefix + "pos.")
        if self.char_encoder is not None:
            yield from self.char_encoder.named_parameters(prefix + "char.")
