"""Sentence encoders behind the embed service.

Two kinds: a real pretrained sentence-transformer (the production path)
and a keyed-hash encoder that needs no model files, used for tests,
development, and offline smoke runs.  Both are deterministic: the same
text always encodes to the same vector within one process and across
processes.
"""

import hashlib

import numpy as np


class HashEncoder:
    """Deterministic pseudo-embeddings derived from a keyed text hash.

    Carries no semantics; exists so the service (and its clients) can be
    exercised without downloading a model.  Vectors are unnormalized
    standard-normal draws seeded per text, so distinct texts get distinct
    directions with probability 1.
    """

    def __init__(self, dim: int, seed: int = 0):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self.seed = int(seed)
        self.name = f"hash:{self.dim}:{self.seed}"
        self._key = self.seed.to_bytes(8, "little", signed=True)

    def encode(self, texts) -> np.ndarray:
        out = np.empty((len(texts), self.dim))
        for i, text in enumerate(texts):
            digest = hashlib.blake2b(text.encode("utf-8"), key=self._key,
                                     digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            out[i] = rng.standard_normal(self.dim)
        return out


class SentenceTransformerEncoder:
    """A pretrained sentence-transformers model in inference mode.

    The embedding dimension is read from the model.  Outputs are not
    normalized; overlong inputs are truncated by the model tokenizer.
    """

    def __init__(self, model_name: str):
        # deferred import: the dependency is optional and slow to load
        from sentence_transformers import SentenceTransformer

        self._model = SentenceTransformer(model_name)
        self.dim = int(self._model.get_sentence_embedding_dimension())
        self.name = model_name

    def encode(self, texts) -> np.ndarray:
        vectors = self._model.encode(list(texts), convert_to_numpy=True,
                                     normalize_embeddings=False,
                                     show_progress_bar=False)
        return np.asarray(vectors, dtype=np.float64)


def build_encoder(spec: str):
    """Encoder from a model spec: 'hash:<dim>[:<seed>]' or a model name."""
    if spec == "hash" or spec.startswith("hash:"):
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ValueError(f"hash spec must be hash:<dim>[:<seed>], got {spec!r}")
        try:
            dim = int(parts[1])
            seed = int(parts[2]) if len(parts) == 3 else 0
        except (ValueError, IndexError):
            raise ValueError(
                f"hash spec must be hash:<dim>[:<seed>], got {spec!r}") from None
        return HashEncoder(dim, seed)
    return SentenceTransformerEncoder(spec)
