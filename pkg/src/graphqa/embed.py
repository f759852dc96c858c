"""Embedding providers, cosine ranking, and the on-disk vector cache.

Two providers conform to the same small contract (``identifier``, ``dim``,
``embed``): a remote HTTP service for real sentence encoders, and a seeded
feature-hashing embedder so everything downstream runs offline and
deterministically. Vectors are 1-d float64 numpy arrays everywhere.
"""

from __future__ import annotations

import hashlib
import json
import re
import struct
import threading
import time
import urllib.error
import urllib.request
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .errors import DataError, ProviderError

_TOKEN_RE = re.compile(r"\w+")


class EmbeddingProvider(Protocol):
    identifier: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def check_vector(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    """Validate one vector: 1-d, float, finite, optionally of a fixed dim."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"expected dim {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector contains NaN/Inf")
    return v


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine undefined for zero-norm input")
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def top_k(query: np.ndarray, candidates: Sequence[tuple], k: int) -> list[tuple]:
    """Rank candidates by cosine to the query, descending.

    Ties break toward the ascending key so rankings stay reproducible.
    Returns at most k (key, score) pairs.
    """
    if k < 1:
        raise ValueError("k must be positive")
    query = np.asarray(query, dtype=np.float64)
    scored = [(key, cosine(query, vec)) for key, vec in candidates]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored[:k]


def hash_embed(text: str, dim: int, seed: int) -> np.ndarray:
    """Deterministic feature-hashing embedding.

    Tokens (runs of word characters) hash to one of ``dim`` buckets with a
    +/-1 sign, both taken from a keyed blake2b digest, and the accumulated
    vector is L2-normalized. Texts with no tokens map to the basis vector
    e_0 so the result is never zero.
    """
    if dim < 2:
        raise ValueError("dim must be at least 2")
    key = str(seed).encode("ascii")
    acc = np.zeros(dim, dtype=np.float64)
    for token in _TOKEN_RE.findall(text):
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=16, key=key).digest()
        bucket = int.from_bytes(digest[:8], "little") % dim
        sign = 1.0 if digest[8] & 1 else -1.0
        acc[bucket] += sign
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        acc[0] = 1.0
        return acc
    return acc / norm


class HashEmbedder:
    """Offline provider built on hash_embed; same inputs, same vectors."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 2:
            raise ValueError("dim must be at least 2")
        self.dim = dim
        self.seed = seed
        self.identifier = f"hash-{dim}-{seed}"

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return [hash_embed(t, self.dim, self.seed) for t in texts]


class RemoteEmbedder:
    """HTTP provider: POST /embed {"texts": [...]} -> {"vectors": [[...]]}.

    Any non-200 response or malformed payload is a provider error. In-flight
    requests are bounded by a semaphore and failures retry with exponential
    backoff before giving up.
    """

    def __init__(
        self,
        url: str,
        dim: int,
        timeout_secs: float = 60.0,
        max_in_flight: int = 4,
        retries: int = 3,
        backoff_secs: float = 0.1,
    ):
        self.url = url.rstrip("/")
        self.dim = dim
        self.identifier = f"remote-{self.url}-{dim}"
        self.timeout_secs = timeout_secs
        self.retries = retries
        self.backoff_secs = backoff_secs
        self._gate = threading.Semaphore(max_in_flight)

    def _post(self, texts: Sequence[str]) -> list:
        payload = json.dumps({"texts": list(texts)}).encode("utf-8")
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff_secs * (2 ** (attempt - 1)))
            request = urllib.request.Request(
                self.url + "/embed",
                data=payload,
                headers={"Content-Type": "application/json"},
                method="POST",
            )
            try:
                with self._gate:
                    with urllib.request.urlopen(
                        request, timeout=self.timeout_secs
                    ) as resp:
                        body = resp.read()
                return json.loads(body.decode("utf-8"))["vectors"]
            except urllib.error.HTTPError as exc:
                last_error = ProviderError(f"embed endpoint returned HTTP {exc.code}")
            except Exception as exc:
                last_error = ProviderError(f"embed request failed: {exc}")
        raise last_error

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        vectors = self._post(texts)
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError(
                f"embed response has {len(vectors)} vectors for {len(texts)} texts"
            )
        out = []
        for row in vectors:
            vec = np.asarray(row, dtype=np.float64)
            if vec.ndim != 1 or vec.shape[0] != self.dim:
                raise ProviderError(
                    f"embed response vector has dim {vec.shape}, expected {self.dim}"
                )
            if not np.all(np.isfinite(vec)):
                raise ProviderError("embed response contains NaN/Inf")
            out.append(vec)
        return out


def embed_texts(provider: EmbeddingProvider, texts: Sequence[str]) -> list[np.ndarray]:
    """Embed texts through any provider, enforcing the provider contract."""
    if not texts:
        raise ValueError("texts must be non-empty")
    vectors = provider.embed(texts)
    if len(vectors) != len(texts):
        raise ProviderError(
            f"provider {provider.identifier} returned {len(vectors)} vectors "
            f"for {len(texts)} texts"
        )
    return [check_vector(v, provider.dim) for v in vectors]


def text_digest(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Digest-keyed vector store, one file per provider.

    File layout: a JSON header line {"provider", "dim", "count"}, then
    ``count`` records of a digest hex line followed by ``dim`` little-endian
    64-bit floats. Records are written sorted by digest, so equal contents
    give byte-identical files no matter the insertion order.
    """

    def __init__(self, provider_id: str, dim: int):
        self.provider_id = provider_id
        self.dim = dim
        self._store: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._store)

    def lookup(self, text: str) -> np.ndarray | None:
        with self._lock:
            vec = self._store.get(text_digest(text))
        return None if vec is None else vec.copy()

    def store(self, text: str, vec: np.ndarray) -> None:
        vec = check_vector(vec, self.dim)
        with self._lock:
            self._store[text_digest(text)] = vec.copy()

    def embed(self, provider: EmbeddingProvider, texts: Sequence[str]) -> list[np.ndarray]:
        """embed_texts with cache fill: misses go to the provider once."""
        if provider.identifier != self.provider_id or provider.dim != self.dim:
            raise ValueError(
                f"cache is for {self.provider_id}/{self.dim}, "
                f"got {provider.identifier}/{provider.dim}"
            )
        missing = []
        for text in texts:
            if self.lookup(text) is None and text not in missing:
                missing.append(text)
        if missing:
            for text, vec in zip(missing, embed_texts(provider, missing)):
                self.store(text, vec)
        return [self.lookup(text) for text in texts]

    def save(self, path: str | Path) -> None:
        header = {"provider": self.provider_id, "dim": self.dim, "count": len(self._store)}
        with self._lock:
            records = sorted(self._store.items())
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode("utf-8") + b"\n")
            for digest, vec in records:
                fh.write(digest.encode("ascii") + b"\n")
                fh.write(struct.pack(f"<{self.dim}d", *vec))

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingCache":
        with open(path, "rb") as fh:
            header_line = fh.readline()
            try:
                header = json.loads(header_line)
                provider_id = header["provider"]
                dim = int(header["dim"])
                count = int(header["count"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise DataError(f"bad cache header in {path}")
            cache = cls(provider_id, dim)
            record_bytes = 8 * dim
            for i in range(count):
                digest = fh.readline().strip().decode("ascii")
                if not digest:
                    raise DataError(f"cache {path} truncated at record {i}")
                blob = fh.read(record_bytes)
                if len(blob) != record_bytes:
                    raise DataError(f"cache {path} truncated at record {i}")
                cache._store[digest] = np.array(
                    struct.unpack(f"<{dim}d", blob), dtype=np.float64
                )
            if fh.read(1):
                raise DataError(f"cache {path} has trailing bytes")
        return cache
