"""Penultimate-layer embeddings, k-means clustering and cluster purity."""

from dataclasses import dataclass

import numpy as np

from . import net, rng
from .colored import ColoredDataset
from .errors import LengthMismatch, TooFewPoints


@dataclass
class ClusterAssignment:
    assignment: np.ndarray   # (N,) int64 in [0, k)
    centroids: np.ndarray    # (k, d)
    inertia: float
    k: int


def extract_embeddings(model, dataset: ColoredDataset, batch: int = 4096) -> np.ndarray:
    """Post-ReLU activations of the penultimate layer, one row per instance."""
    x = dataset.flat_images()
    rows = []
    for start in range(0, len(x), batch):
        _, acts = net.forward(model.params, x[start : start + batch])
        rows.append(acts[-1])
    return np.concatenate(rows, axis=0)


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (x * x).sum(axis=1)[:, None] + (centroids * centroids).sum(axis=1)[None, :]
    d -= 2.0 * (x @ centroids.T)
    return np.maximum(d, 0.0)


def _kmeanspp_init(x: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = len(x)
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[gen.integers(n)]
    closest = _sq_dists(x, centroids[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[j] = x[gen.integers(n)]
        else:
            centroids[j] = x[gen.choice(n, p=closest / total)]
        closest = np.minimum(closest, _sq_dists(x, centroids[j : j + 1])[:, 0])
    return centroids


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iters: int, tol: float,
           trace: list | None = None):
    k = len(centroids)
    prev_inertia = np.inf
    for _ in range(max_iters):
        dists = _sq_dists(x, centroids)
        assignment = dists.argmin(axis=1)
        mindist = dists[np.arange(len(x)), assignment]
        # repair empty clusters with the globally farthest point
        for j in range(k):
            if not (assignment == j).any():
                far = mindist.argmax()
                centroids[j] = x[far]
                assignment[far] = j
                mindist[far] = 0.0
        inertia = float(mindist.sum())
        if trace is not None:
            trace.append(inertia)
        for j in range(k):
            centroids[j] = x[assignment == j].mean(axis=0)
        if prev_inertia - inertia <= tol * max(prev_inertia, 1e-300):
            break
        prev_inertia = inertia
    dists = _sq_dists(x, centroids)
    assignment = dists.argmin(axis=1)
    inertia = float(dists[np.arange(len(x)), assignment].sum())
    return assignment, centroids, inertia


def kmeans(embeddings: np.ndarray, k: int, seed: int, restarts: int = 10,
           max_iters: int = 300, tol: float = 1e-6) -> ClusterAssignment:
    """Lloyd iterations with k-means++ seeding; best of `restarts` inits."""
    x = np.asarray(embeddings, dtype=np.float64)
    if len(x) < k:
        raise TooFewPoints(f"{len(x)} points for k={k}")
    best = None
    for r in range(restarts):
        gen = rng.stream(seed, f"cluster:{r}")
        init = _kmeanspp_init(x, k, gen)
        assignment, centroids, inertia = _lloyd(x, init.copy(), max_iters, tol)
        if best is None or inertia < best[0]:
            best = (inertia, assignment, centroids)
    inertia, assignment, centroids = best
    return ClusterAssignment(assignment=assignment.astype(np.int64),
                             centroids=centroids, inertia=inertia, k=k)


def purity(assignment: ClusterAssignment, attribute: np.ndarray) -> float:
    """Size-weighted purity: sum over clusters of the majority count, over N."""
    attr = np.asarray(attribute)
    if len(attr) != len(assignment.assignment):
        raise LengthMismatch(f"{len(attr)} vs {len(assignment.assignment)}")
    total = 0
    for j in range(assignment.k):
        members = attr[assignment.assignment == j]
        if len(members):
            total += np.bincount(members.astype(np.int64)).max()
    return total / len(attr)


def export_assignment_csv(assignment: ClusterAssignment, dataset: ColoredDataset,
                          path: str) -> None:
    with open(path, "w") as fh:
        fh.write("instance_index,cluster,y,z\n")
        for i, c in enumerate(assignment.assignment):
            fh.write(f"{i},{c},{dataset.labels[i]},{dataset.color_ids[i]}\n")
