"""Full and stochastic first-order oracles for the smooth loss.

Both supported losses have per-sample gradients of the form coef * a_i,
so batch gradients reduce to one coefficient per drawn sample scattered
back through the sparse rows. The full gradient and the forced
full-enumeration batch use the same accumulation code, which makes the
unbiasedness identity hold to rounding rather than approximately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LOSS_LOGISTIC, Dataset, Problem


@dataclass
class GradSample:
    """A realized stochastic gradient together with the indices drawn."""

    gradient: np.ndarray
    sample_indices: np.ndarray


@dataclass(frozen=True)
class NoiseStats:
    empirical_bias_norm: float
    empirical_second_moment: float


def _sigmoid(t: np.ndarray) -> np.ndarray:
    # evaluate in the branch that never overflows
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    et = np.exp(t[~pos])
    out[~pos] = et / (1.0 + et)
    return out


def margins(dataset: Dataset, x: np.ndarray) -> np.ndarray:
    """Per-sample decision values a_i^T x."""
    if dataset.indices.size == 0:
        return np.zeros(dataset.n_samples)
    return np.bincount(dataset.row_ids, weights=dataset.data * x[dataset.indices],
                       minlength=dataset.n_samples)


def _coefs(loss: str, m: np.ndarray, labels: np.ndarray) -> np.ndarray:
    if loss == LOSS_LOGISTIC:
        return -labels * _sigmoid(-labels * m)
    return m - labels


def _check_x(dataset: Dataset, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dataset.dimension,):
        raise ValueError(f"x must have length {dataset.dimension}, got {x.shape}")
    return x


def data_loss(loss: str, dataset: Dataset, x: np.ndarray) -> float:
    """Average per-sample loss, without any folded ridge term."""
    x = _check_x(dataset, x)
    m = margins(dataset, x)
    if loss == LOSS_LOGISTIC:
        # log(1 + exp(-b*m)) evaluated stably
        return float(np.mean(np.logaddexp(0.0, -dataset.labels * m)))
    return float(0.5 * np.mean((m - dataset.labels) ** 2))


def loss_value(problem: Problem, dataset: Dataset, x: np.ndarray) -> float:
    """Value of the smooth loss oracle, including the folded ridge."""
    x = _check_x(dataset, x)
    value = data_loss(problem.loss, dataset, x)
    if problem.ridge:
        value += 0.5 * problem.ridge * float(x @ x)
    return value


def _gradient_over_rows(problem: Problem, dataset: Dataset, x: np.ndarray,
                        rows: np.ndarray | None) -> np.ndarray:
    """Average per-sample gradient over the given rows (all rows if None)."""
    d = dataset.dimension
    if rows is None:
        m = margins(dataset, x)
        coefs = _coefs(problem.loss, m, dataset.labels) / dataset.n_samples
        if dataset.indices.size == 0:
            grad = np.zeros(d)
        else:
            coef_rep = np.repeat(coefs, np.diff(dataset.indptr))
            grad = np.bincount(dataset.indices, weights=dataset.data * coef_rep,
                               minlength=d)
    else:
        indptr, indices, data, labels = (dataset.indptr, dataset.indices,
                                         dataset.data, dataset.labels)
        if rows.size == 1:
            i = int(rows[0])
            lo, hi = indptr[i], indptr[i + 1]
            cols, vals = indices[lo:hi], data[lo:hi]
            coef = _coefs(problem.loss, np.array([vals @ x[cols]]),
                          labels[i:i + 1])[0]
            grad = np.zeros(d)
            grad[cols] = coef * vals
        else:
            col_parts, weight_parts = [], []
            for i in rows:
                lo, hi = indptr[i], indptr[i + 1]
                cols, vals = indices[lo:hi], data[lo:hi]
                coef = _coefs(problem.loss, np.array([vals @ x[cols]]),
                              labels[i:i + 1])[0]
                col_parts.append(cols)
                weight_parts.append(coef * vals)
            if col_parts and sum(c.size for c in col_parts):
                grad = np.bincount(np.concatenate(col_parts),
                                   weights=np.concatenate(weight_parts),
                                   minlength=d)
            else:
                grad = np.zeros(d)
            grad /= rows.size
    if problem.ridge:
        grad = grad + problem.ridge * x
    return grad


def full_gradient(problem: Problem, dataset: Dataset, x: np.ndarray) -> np.ndarray:
    """Exact average of per-sample gradients (plus the folded ridge)."""
    x = _check_x(dataset, x)
    return _gradient_over_rows(problem, dataset, x, None)


def stochastic_gradient(problem: Problem, dataset: Dataset, x: np.ndarray,
                        rng: np.random.Generator, batch_size: int,
                        enumerate_all: bool = False) -> GradSample:
    """Average gradient over a uniform with-replacement batch.

    ``enumerate_all`` replaces sampling with a pass over every sample
    (and does not touch the rng); the result then equals full_gradient.
    """
    x = _check_x(dataset, x)
    if enumerate_all:
        return GradSample(_gradient_over_rows(problem, dataset, x, None),
                          np.arange(dataset.n_samples, dtype=np.int64))
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    idx = rng.integers(0, dataset.n_samples, size=batch_size)
    return GradSample(_gradient_over_rows(problem, dataset, x, idx), idx)


def grad_composed(problem: Problem, dataset: Dataset, x: np.ndarray,
                  lam: np.ndarray, rng: np.random.Generator, batch_size: int,
                  enumerate_all: bool = False) -> GradSample:
    """Stochastic gradient of the smooth Lagrangian part: grad l(x, xi) - F^T lam."""
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (problem.penalty.n_rows,):
        raise ValueError(f"lambda must have length {problem.penalty.n_rows}, got {lam.shape}")
    gs = stochastic_gradient(problem, dataset, x, rng, batch_size, enumerate_all)
    gs.gradient = gs.gradient - problem.penalty.rmatvec(lam)
    return gs


def estimate_noise(problem: Problem, dataset: Dataset, x: np.ndarray,
                   trials: int, seed: int) -> NoiseStats:
    """Monte-Carlo estimate of the bias and second moment of single-sample gradients."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = _check_x(dataset, x)
    rng = np.random.default_rng(seed)
    mean_grad = full_gradient(problem, dataset, x)
    # accumulate centered deviations so a noiseless oracle reports exactly 0
    acc = np.zeros(dataset.dimension)
    acc_sq = 0.0
    for _ in range(trials):
        diff = stochastic_gradient(problem, dataset, x, rng, 1).gradient - mean_grad
        acc += diff
        acc_sq += float(diff @ diff)
    return NoiseStats(float(np.linalg.norm(acc / trials)), acc_sq / trials)
