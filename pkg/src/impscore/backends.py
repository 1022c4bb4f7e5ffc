"""Embedding backends: toy hash encoder, file lookup, HTTP client, cache.

Every backend maps a list of texts to an (n, dim) float64 array with
output row i corresponding to input text i, and returns identical vectors
for identical texts within one backend instance.

Service wire protocol (shared JSON schema in schemas/embed_protocol.schema.json):
    POST {base_url}/embed   body {"texts": [str]} -> {"embeddings": [[float]], "dim": int}
    GET  {base_url}/health  -> {"status": str, "model": str, "dim": int}
"""

from __future__ import annotations

import json
import threading
import time
from functools import lru_cache
from hashlib import blake2b
from importlib import resources
from typing import Iterable, Mapping, Sequence

import jsonschema
import numpy as np
import requests

from .data import iter_jsonl, require_str
from .exceptions import BackendError, ConfigError, MissingEmbeddingError, SchemaError


class EmbeddingBackend:
    """Interface: `dim` plus `embed(texts) -> (n, dim) float64 array`."""

    dim: int
    ident: str

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        raise NotImplementedError


@lru_cache(maxsize=8)
def _rotation(d: int, seed: int) -> np.ndarray:
    """Fixed orthogonal rotation derived from (d, seed)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, d, 0x726F74]))
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))[None, :]
    q.setflags(write=False)
    return q


def toy_hash_encoder(text: str, d: int, seed: int = 0) -> np.ndarray:
    """Deterministic stand-in encoder: signed trigram hashing plus rotation.

    Character trigrams are hashed (keyed blake2b, process-independent) into
    d signed buckets, then the bucket vector is rotated by a fixed seeded
    orthogonal matrix.  Near-duplicate strings land near each other; no
    normalization is applied.  Empty text gives the zero vector.
    """
    if d < 1:
        raise ConfigError(f"d must be >= 1, got {d}")
    if seed < 0:
        raise ConfigError(f"seed must be >= 0, got {seed}")
    key = (seed % (1 << 64)).to_bytes(8, "little")
    acc = np.zeros(d)
    if len(text) >= 3:
        grams = (text[i:i + 3] for i in range(len(text) - 2))
    elif text:
        grams = (text,)  # short texts hash the whole string as one gram
    else:
        grams = ()
    for gram in grams:
        h = int.from_bytes(blake2b(gram.encode("utf-8"), key=key,
                                   digest_size=8).digest(), "little")
        acc[(h >> 1) % d] += 1.0 if h & 1 else -1.0
    return _rotation(d, seed) @ acc


class ToyHashBackend(EmbeddingBackend):
    """Backend wrapper around toy_hash_encoder."""

    def __init__(self, dim: int = 768, seed: int = 0):
        if dim < 1:
            raise ConfigError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)
        self.seed = int(seed)
        self.ident = f"toy:dim={self.dim},seed={self.seed}"

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        out = np.empty((len(texts), self.dim))
        for i, text in enumerate(texts):
            out[i] = toy_hash_encoder(text, self.dim, self.seed)
        return out


class FileBackend(EmbeddingBackend):
    """Exact-string lookup over a precomputed embeddings JSONL file."""

    def __init__(self, path):
        self.path = str(path)
        self.ident = f"file:{self.path}"
        self._map: dict[str, np.ndarray] = {}
        self._dim: int | None = None
        for lineno, obj in iter_jsonl(path):
            text = require_str(obj, "text", path, lineno, allow_empty=True)
            if "embedding" not in obj:
                raise SchemaError(f"{path}:{lineno}: missing field 'embedding'")
            try:
                vec = np.asarray(obj["embedding"], dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise SchemaError(
                    f"{path}:{lineno}: embedding is not a numeric vector: {exc}"
                ) from exc
            if vec.ndim != 1:
                raise SchemaError(f"{path}:{lineno}: embedding must be a flat list")
            if not np.isfinite(vec).all():
                raise SchemaError(f"{path}:{lineno}: embedding has non-finite entries")
            if self._dim is None:
                if vec.shape[0] < 1:
                    raise SchemaError(f"{path}:{lineno}: embedding is empty")
                self._dim = vec.shape[0]
            elif vec.shape[0] != self._dim:
                raise SchemaError(
                    f"{path}:{lineno}: embedding dimension {vec.shape[0]} != {self._dim}"
                )
            vec.setflags(write=False)
            self._map[text] = vec

    @property
    def dim(self) -> int:
        if self._dim is None:
            raise BackendError(f"embeddings file {self.path} holds no records")
        return self._dim

    def __len__(self) -> int:
        return len(self._map)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        if not texts:
            return np.empty((0, self._dim or 0))
        out = np.empty((len(texts), self.dim))
        for i, text in enumerate(texts):
            try:
                out[i] = self._map[text]
            except KeyError:
                raise MissingEmbeddingError(text) from None
        return out


def write_embeddings_jsonl(path, embeddings: Mapping[str, Iterable[float]]) -> None:
    """Write a FileBackend-compatible embeddings file (insertion order)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for text, vec in embeddings.items():
            record = {"text": text,
                      "embedding": [float(x) for x in np.asarray(vec).ravel()]}
            fh.write(json.dumps(record, ensure_ascii=False))
            fh.write("\n")


@lru_cache(maxsize=1)
def protocol_schema() -> dict:
    """The packaged embed-service JSON schema (request/response/health)."""
    text = resources.files("impscore").joinpath(
        "schemas/embed_protocol.schema.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=4)
def _validator(name: str) -> jsonschema.Draft202012Validator:
    return jsonschema.Draft202012Validator(protocol_schema()["$defs"][name])


def validate_protocol(payload, kind: str) -> None:
    """Validate a payload against one protocol shape; BackendError on failure.

    kind is one of embed_request, embed_response, health_response.
    """
    error = jsonschema.exceptions.best_match(_validator(kind).iter_errors(payload))
    if error is not None:
        raise BackendError(f"{kind} failed schema validation: {error.message}")


class ServiceBackend(EmbeddingBackend):
    """HTTP client for an embedding service speaking the wire protocol.

    Transient failures (connection errors, timeouts, 502/503/504) are
    retried up to max_retries times with exponential backoff.  The
    service dimension is learned from /health on first use and enforced
    on every response.
    """

    _RETRY_STATUS = (502, 503, 504)

    def __init__(self, base_url: str, timeout: float = 30.0, batch_size: int = 64,
                 max_retries: int = 3, backoff: float = 0.25, session=None):
        if batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
        self.base_url = base_url.rstrip("/")
        self.ident = f"service:{self.base_url}"
        self.timeout = timeout
        self.batch_size = int(batch_size)
        self.max_retries = int(max_retries)
        self.backoff = backoff
        self.retry_count = 0
        self._session = session if session is not None else requests.Session()
        self._dim: int | None = None

    def _request(self, method: str, path: str, **kwargs):
        url = self.base_url + path
        last = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
                self.retry_count += 1
            try:
                resp = self._session.request(method, url, timeout=self.timeout,
                                             **kwargs)
            except requests.RequestException as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in self._RETRY_STATUS:
                last = f"status {resp.status_code}"
                continue
            return resp
        raise BackendError(
            f"{method} {url} failed after {self.max_retries} retries ({last})")

    def _payload(self, resp, kind: str):
        if resp.status_code != 200:
            raise BackendError(
                f"{resp.request.method} {resp.url} returned status "
                f"{resp.status_code}: {resp.text[:200]}")
        try:
            payload = resp.json()
        except ValueError as exc:
            raise BackendError(f"{resp.url} returned invalid JSON: {exc}") from exc
        validate_protocol(payload, kind)
        return payload

    def health(self) -> dict:
        return self._payload(self._request("GET", "/health"), "health_response")

    @property
    def dim(self) -> int:
        if self._dim is None:
            self._dim = int(self.health()["dim"])
        return self._dim

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        out = np.empty((len(texts), self.dim))
        for start in range(0, len(texts), self.batch_size):
            chunk = texts[start:start + self.batch_size]
            resp = self._request("POST", "/embed", json={"texts": chunk})
            payload = self._payload(resp, "embed_response")
            if payload["dim"] != self.dim:
                raise BackendError(
                    f"service dimension changed: {payload['dim']} != {self.dim}")
            vecs = np.asarray(payload["embeddings"], dtype=np.float64)
            if vecs.shape != (len(chunk), self.dim):
                raise BackendError(
                    f"embed response shape {vecs.shape} does not match "
                    f"({len(chunk)}, {self.dim})")
            out[start:start + len(chunk)] = vecs
        return out


class CachedBackend(EmbeddingBackend):
    """Memoizing wrapper; misses are fetched in one batched inner call."""

    def __init__(self, inner: EmbeddingBackend):
        self.inner = inner
        self.hits = 0
        self.misses = 0
        self._map: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.inner.dim

    @property
    def ident(self) -> str:
        return self.inner.ident

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        texts = list(texts)
        with self._lock:
            known = set(self._map)
            self.hits += sum(t in known for t in texts)
            self.misses += sum(t not in known for t in texts)
        missing = [t for t in dict.fromkeys(texts) if t not in known]
        if missing:
            vecs = np.asarray(self.inner.embed(missing), dtype=np.float64)
            if vecs.shape[0] != len(missing):
                raise BackendError(
                    f"inner backend returned {vecs.shape[0]} vectors "
                    f"for {len(missing)} texts")
            with self._lock:
                for text, vec in zip(missing, vecs):
                    vec = np.array(vec)
                    vec.setflags(write=False)
                    self._map.setdefault(text, vec)
        if not texts:
            return np.empty((0, self.dim))
        with self._lock:
            return np.stack([self._map[t] for t in texts])


def cached(backend: EmbeddingBackend) -> CachedBackend:
    """Wrap a backend with memoization (identity if already cached)."""
    if isinstance(backend, CachedBackend):
        return backend
    return CachedBackend(backend)


def embed_unique(texts: Sequence[str], backend: EmbeddingBackend
                 ) -> tuple[np.ndarray, dict[str, int]]:
    """Embed each distinct text once; returns (matrix, text -> row map)."""
    uniq = list(dict.fromkeys(texts))
    matrix = np.asarray(cached(backend).embed(uniq), dtype=np.float64)
    return matrix, {t: i for i, t in enumerate(uniq)}
