"""Dependency parser built on a bidirectional recurrent autoencoder.

A context encoder turns token embeddings into context vectors; a second
encoder maps each context vector to an approximation of its head's context
vector (its "latent head"). Decoding picks each token's head by cosine
similarity, repairs cycles, and a multi-task classifier assigns the arc label
and POS tag jointly.
"""

__version__ = "0.1.0"
