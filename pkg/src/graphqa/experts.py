"""Demonstration experts: clustering, count selection, routing, selection.

The demonstration pool is clustered into experts with seeded k-means; the
cluster count minimizes within-cluster variance plus a complexity penalty;
a query routes to the expert whose centroid is most cosine-similar; and the
routed expert contributes its query-nearest demonstrations to the prompt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embed import cosine
from .errors import DataError
from .store import Demonstration, textualize


def build_prompt_text(demo: Demonstration) -> str:
    """The clustering text of a demonstration: textualized subgraph, then
    the question on its own line."""
    return textualize(demo.subgraph) + "\n" + demo.example.question


@dataclass(frozen=True)
class DemoPool:
    """Solved demonstrations plus embeddings of their prompt texts."""

    demos: tuple[Demonstration, ...]
    prompt_vectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.demos) != len(self.prompt_vectors):
            raise ValueError("demos and prompt_vectors must align")
        dims = {v.shape[0] for v in self.prompt_vectors}
        if len(dims) > 1:
            raise ValueError(f"prompt vectors disagree on dim: {sorted(dims)}")

    def __len__(self) -> int:
        return len(self.demos)

    @property
    def dim(self) -> int:
        if not self.prompt_vectors:
            raise ValueError("empty pool has no dim")
        return self.prompt_vectors[0].shape[0]


@dataclass(frozen=True)
class ClusterModel:
    """A fitted expert clustering; immutable once built."""

    centroids: tuple[np.ndarray, ...]
    assignments: tuple[int, ...]
    c_star: int
    lambda_reg: float
    objective: float
    seed: int

    def __post_init__(self):
        if self.c_star != len(self.centroids):
            raise ValueError("c_star must equal the centroid count")
        counts = [0] * self.c_star
        for a in self.assignments:
            if not 0 <= a < self.c_star:
                raise ValueError(f"assignment {a} outside 0..{self.c_star - 1}")
            counts[a] += 1
        if any(c == 0 for c in counts):
            raise ValueError("every cluster must be non-empty")

    @property
    def dim(self) -> int:
        return self.centroids[0].shape[0]

    def members(self, cluster: int) -> list[int]:
        return [i for i, a in enumerate(self.assignments) if a == cluster]


@dataclass(frozen=True)
class ExpertRoute:
    cluster: int
    score: float
    demo_ids: tuple[int, ...] = field(default_factory=tuple)


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ncd,ncd->nc", diff, diff)


def _kmeanspp_init(points: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(c - 1):
        total = float(d2.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            idx = int(np.argmax(d2))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].copy()


def _repair_empty(points: np.ndarray, assignments: np.ndarray, c: int) -> None:
    """Give each empty cluster the farthest point of the largest cluster."""
    counts = np.bincount(assignments, minlength=c)
    for k in range(c):
        if counts[k] > 0:
            continue
        donor = int(np.argmax(counts))
        members = np.where(assignments == donor)[0]
        centroid = points[members].mean(axis=0)
        far = members[int(np.argmax(np.sum((points[members] - centroid) ** 2, axis=1)))]
        assignments[far] = k
        counts[donor] -= 1
        counts[k] += 1


def kmeans(
    points, c: int, seed, debug: bool = False
) -> tuple[np.ndarray, np.ndarray, float]:
    """Seeded k-means++ then Lloyd iterations with empty-cluster repair.

    Stops when the relative objective change drops below 1e-6 or after 100
    iterations. Returns (centroids, assignments, objective) where objective
    is the summed squared distance of each point to its centroid. With
    ``debug`` the per-iteration monotonicity of the objective is asserted.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        points = np.stack([np.asarray(p, dtype=np.float64) for p in points])
    n = points.shape[0]
    if not 1 <= c <= n:
        raise ValueError(f"c must be in 1..{n}, got {c}")

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(points, c, rng)
    prev = np.inf
    assignments = np.zeros(n, dtype=np.int64)
    for _ in range(100):
        assignments = np.argmin(_squared_distances(points, centroids), axis=1)
        _repair_empty(points, assignments, c)
        for k in range(c):
            centroids[k] = points[assignments == k].mean(axis=0)
        objective = float(
            np.sum((points - centroids[assignments]) ** 2)
        )
        if debug:
            assert objective <= prev + 1e-9, "objective increased"
        if np.isfinite(prev) and (prev == 0.0 or (prev - objective) / prev < 1e-6):
            prev = objective
            break
        prev = objective
    return centroids, assignments, float(prev)


def default_lambda_reg(points) -> float:
    """Penalty commensurate with the variance term: mean squared distance
    to the global centroid, divided by 8."""
    points = np.asarray(points, dtype=np.float64)
    center = points.mean(axis=0)
    return float(np.mean(np.sum((points - center) ** 2, axis=1)) / 8.0)


def select_cluster_count(
    points, lambda_reg: float, c_max: int, seed: int
) -> ClusterModel:
    """Scan C = 1..c_max and keep the model minimizing objective + lambda*C.

    Each C gets five seeded restarts (best objective kept); penalized ties
    break toward smaller C.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        points = np.stack([np.asarray(p, dtype=np.float64) for p in points])
    n = points.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty pool")
    if lambda_reg <= 0.0:
        raise ValueError("lambda_reg must be positive")
    if not 1 <= c_max <= n:
        raise ValueError(f"c_max must be in 1..{n}, got {c_max}")

    best = None
    best_penalized = np.inf
    for c in range(1, c_max + 1):
        run_best = None
        for restart in range(5):
            rng_seed = np.random.SeedSequence((seed, c, restart))
            result = kmeans(points, c, rng_seed)
            if run_best is None or result[2] < run_best[2]:
                run_best = result
        penalized = run_best[2] + lambda_reg * c
        if penalized < best_penalized:
            best_penalized = penalized
            best = (c, run_best)
    c_star, (centroids, assignments, objective) = best
    return ClusterModel(
        centroids=tuple(centroids[k].copy() for k in range(c_star)),
        assignments=tuple(int(a) for a in assignments),
        c_star=c_star,
        lambda_reg=float(lambda_reg),
        objective=float(objective),
        seed=int(seed),
    )


def route(query_vec: np.ndarray, model: ClusterModel) -> ExpertRoute:
    """Route to the centroid with the highest cosine; smaller index wins
    ties. Zero-norm centroids never win."""
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if float(np.linalg.norm(query_vec)) == 0.0:
        raise ValueError("cannot route a zero-norm query vector")
    best_cluster = 0
    best_score = -np.inf
    for k, centroid in enumerate(model.centroids):
        if float(np.linalg.norm(centroid)) == 0.0:
            continue
        score = cosine(query_vec, centroid)
        if score > best_score:
            best_score = score
            best_cluster = k
    return ExpertRoute(cluster=best_cluster, score=float(best_score))


def select_demo_indices(
    pool: DemoPool,
    model: ClusterModel,
    routed: ExpertRoute,
    query_vec: np.ndarray,
    m: int,
) -> list[int]:
    """Indices of the routed cluster's m demos nearest the query vector,
    descending by cosine; index breaks ties."""
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return []
    members = model.members(routed.cluster)
    scored = [(i, cosine(query_vec, pool.prompt_vectors[i])) for i in members]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return [i for i, _ in scored[:m]]


def select_demos(
    pool: DemoPool,
    model: ClusterModel,
    routed: ExpertRoute,
    query_vec: np.ndarray,
    m: int,
) -> list[Demonstration]:
    indices = select_demo_indices(pool, model, routed, query_vec, m)
    return [pool.demos[i] for i in indices]


def save_cluster_model(model: ClusterModel, path: str | Path) -> None:
    obj = {
        "lambda": model.lambda_reg,
        "c_star": model.c_star,
        "dim": model.dim,
        "centroids": [list(map(float, c)) for c in model.centroids],
        "assignments": list(model.assignments),
        "objective": model.objective,
        "seed": model.seed,
    }
    Path(path).write_text(json.dumps(obj) + "\n", encoding="utf-8")


def load_cluster_model(path: str | Path) -> ClusterModel:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read cluster model {path}: {exc}")
    try:
        centroids = tuple(
            np.asarray(c, dtype=np.float64) for c in obj["centroids"]
        )
        model = ClusterModel(
            centroids=centroids,
            assignments=tuple(int(a) for a in obj["assignments"]),
            c_star=int(obj["c_star"]),
            lambda_reg=float(obj["lambda"]),
            objective=float(obj["objective"]),
            seed=int(obj["seed"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed cluster model {path}: {exc}")
    if model.centroids and model.dim != int(obj["dim"]):
        raise DataError(f"cluster model {path} dim mismatch")
    return model
