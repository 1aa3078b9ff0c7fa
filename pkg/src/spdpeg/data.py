"""Dataset ingestion, splitting, and synthetic problem generation."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset
from .penalties import GraphSpec

SYNTHETIC_KINDS = ("fused-signal", "graph-logistic")


class ParseError(ValueError):
    """Malformed input line; ``line_no`` is 1-based."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def parse_libsvm(source) -> Dataset:
    """Parse sparse 'label idx:val ...' lines into a Dataset.

    Indices are 1-based in the file and converted to 0-based; labels map to
    +1 when positive and -1 otherwise; indices must be strictly increasing
    within a line. The dimension is the largest index seen.
    """
    if isinstance(source, str):
        source = source.splitlines()
    indptr = [0]
    all_indices: list[np.ndarray] = []
    all_values: list[np.ndarray] = []
    labels = []
    max_idx = -1
    for line_no, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line:
            continue
        tokens = line.split()
        try:
            raw_label = float(tokens[0])
        except ValueError:
            raise ParseError(line_no, f"bad label {tokens[0]!r}") from None
        idxs = np.empty(len(tokens) - 1, dtype=np.int64)
        vals = np.empty(len(tokens) - 1)
        prev = 0
        for k, tok in enumerate(tokens[1:]):
            head, sep, tail = tok.partition(":")
            if not sep:
                raise ParseError(line_no, f"feature {tok!r} is not 'index:value'")
            try:
                idx = int(head)
            except ValueError:
                raise ParseError(line_no, f"bad feature index {head!r}") from None
            if idx < 1:
                raise ParseError(line_no, f"feature index {idx} must be >= 1")
            if idx <= prev:
                raise ParseError(line_no, f"feature index {idx} not strictly increasing")
            try:
                val = float(tail)
            except ValueError:
                raise ParseError(line_no, f"bad feature value {tail!r}") from None
            if not math.isfinite(val):
                raise ParseError(line_no, f"non-finite feature value {tail!r}")
            idxs[k], vals[k] = idx - 1, val
            prev = idx
        labels.append(1.0 if raw_label > 0 else -1.0)
        all_indices.append(idxs)
        all_values.append(vals)
        indptr.append(indptr[-1] + idxs.size)
        if idxs.size:
            max_idx = max(max_idx, int(idxs[-1]))
    if not labels:
        raise ParseError(1, "no samples found")
    indices = (np.concatenate(all_indices) if indptr[-1]
               else np.zeros(0, dtype=np.int64))
    values = np.concatenate(all_values) if indptr[-1] else np.zeros(0)
    return Dataset(np.asarray(indptr), indices, values, np.asarray(labels),
                   max_idx + 1)


def serialize_libsvm(dataset: Dataset) -> str:
    """Inverse of parse_libsvm; float values use repr so they round-trip."""
    lines = []
    for i in range(dataset.n_samples):
        lo, hi = dataset.indptr[i], dataset.indptr[i + 1]
        parts = ["+1" if dataset.labels[i] > 0 else "-1"]
        parts.extend(f"{int(c) + 1}:{float(v)!r}"
                     for c, v in zip(dataset.indices[lo:hi], dataset.data[lo:hi]))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; |train| = round-half-up(fraction * N)."""
    n = dataset.n_samples
    if n < 2:
        raise ValueError("need at least two samples to split")
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    if n_train < 1 or n_train >= n:
        raise ValueError(f"degenerate split: {n_train}/{n - n_train}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return dataset.subset(perm[:n_train]), dataset.subset(perm[n_train:])


def normalize_features(dataset: Dataset) -> tuple[Dataset, np.ndarray]:
    """Scale each feature column to max-abs 1; returns the scales used."""
    scales = np.zeros(dataset.dimension)
    if dataset.indices.size:
        np.maximum.at(scales, dataset.indices, np.abs(dataset.data))
    scales[scales == 0.0] = 1.0
    data = dataset.data / scales[dataset.indices] if dataset.indices.size else dataset.data
    scaled = Dataset(dataset.indptr, dataset.indices, data,
                     dataset.labels, dataset.dimension)
    return scaled, scales


def _dense_rows_dataset(features: np.ndarray, labels: np.ndarray) -> Dataset:
    n, d = features.shape
    indptr = d * np.arange(n + 1, dtype=np.int64)
    indices = np.tile(np.arange(d, dtype=np.int64), n)
    return Dataset(indptr, indices, features.ravel(), labels, d)


def _components(d: int, edges) -> np.ndarray:
    parent = np.arange(d)

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j, _ in edges:
        parent[find(i)] = find(j)
    return np.array([find(i) for i in range(d)])


def synthesize(kind: str, d: int, n: int, noise: float,
               seed: int) -> tuple[Dataset, GraphSpec | None, np.ndarray]:
    """Generate a labeled dataset with known ground truth.

    fused-signal: piecewise-constant truth with three segments; labels are
    sign(a^T x* + noise * g) on Gaussian features scaled to unit expected
    norm. graph-logistic: truth constant on the components of a random
    graph (about half of them zeroed), returned together with the graph.
    """
    if kind not in SYNTHETIC_KINDS:
        raise ValueError(f"unknown synthetic kind {kind!r}")
    if d < 2 or n < 2:
        raise ValueError("need d >= 2 and n >= 2")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    graph = None
    if kind == "fused-signal":
        n_seg = min(3, d)
        x_star = np.empty(d)
        bounds = np.linspace(0, d, n_seg + 1).astype(int)
        seg_vals = rng.standard_normal(n_seg)
        for s in range(n_seg):
            x_star[bounds[s]:bounds[s + 1]] = seg_vals[s]
    else:
        n_edges = min(int(1.2 * d) + 1, d * (d - 1) // 2)
        chosen: set[tuple[int, int]] = set()
        while len(chosen) < n_edges:
            i, j = rng.integers(0, d, size=2)
            if i != j:
                chosen.add((min(i, j), max(i, j)))
        edges = tuple((i, j, 1.0) for i, j in sorted(chosen))
        graph = GraphSpec(edges, d)
        comp = _components(d, edges)
        comp_ids = np.unique(comp)
        comp_vals = rng.standard_normal(comp_ids.size)
        comp_vals[rng.random(comp_ids.size) < 0.5] = 0.0
        if np.all(comp_vals == 0.0):
            comp_vals[0] = 1.0
        lookup = dict(zip(comp_ids.tolist(), comp_vals))
        x_star = np.array([lookup[c] for c in comp])
    features = rng.standard_normal((n, d)) / math.sqrt(d)
    margins = features @ x_star + noise * rng.standard_normal(n)
    labels = np.where(margins >= 0, 1.0, -1.0)
    return _dense_rows_dataset(features, labels), graph, x_star
