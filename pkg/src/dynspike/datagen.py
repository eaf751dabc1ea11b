"""Seeded synthetic datasets with known coefficient paths."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass
class Dataset:
    y: np.ndarray  # (T,)
    X: np.ndarray  # (T, q)
    truth: np.ndarray | None = None  # (T, q) true coefficient paths
    meta: dict = field(default_factory=dict)
    names: list[str] | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError(f"y {self.y.shape} and X {self.X.shape} are inconsistent")
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=float)
            if self.truth.shape != self.X.shape:
                raise ValueError("truth must have the same shape as X")
        if self.names is None:
            self.names = [f"x{j + 1}" for j in range(self.X.shape[1])]
        if len(self.names) != self.X.shape[1]:
            raise ValueError("one name per predictor is required")

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def q(self) -> int:
        return self.X.shape[1]


@dataclass
class CholeskySystem:
    B: np.ndarray  # (T, q, q) strictly lower triangular
    series: np.ndarray  # (T, q)
    eps: np.ndarray  # (T, q)
    process: np.ndarray  # (q, q) process label per entry, -1 on and above the diagonal


def _ar_path(rng, T, phi, innov_var, mean, init_var):
    out = np.empty(T)
    out[0] = mean + np.sqrt(init_var) * rng.standard_normal()
    e = np.sqrt(innov_var) * rng.standard_normal(T)
    for t in range(1, T):
        out[t] = mean + phi * (out[t - 1] - mean) + e[t]
    return out


def generate_example1(seed: int) -> Dataset:
    """Five coefficients: AR around 2, AR switched off halfway, two -2 pulses, two zeros."""
    rng = np.random.default_rng(seed)
    T, q, phi = 200, 5, 0.97
    innov = 0.25 * (1.0 - phi * phi)
    beta = np.zeros((T, q))
    beta[:, 0] = _ar_path(rng, T, phi, innov, 2.0, 0.25)
    # zero-mean recursion started from N(2, 0.25)
    b2 = np.empty(T)
    b2[0] = 2.0 + 0.5 * rng.standard_normal()
    e = np.sqrt(innov) * rng.standard_normal(T)
    for t in range(1, T):
        b2[t] = phi * b2[t - 1] + e[t]
    beta[:100, 1] = b2[:100]
    t1 = np.arange(1, T + 1)
    beta[((t1 >= 21) & (t1 <= 50)) | ((t1 >= 121) & (t1 <= 150)), 2] = -2.0
    X = rng.standard_normal((T, q))
    y = np.sum(X * beta, axis=1) + rng.standard_normal(T)
    return Dataset(y=y, X=X, truth=beta, meta={"generator": "example1", "seed": int(seed)})


def step_process(T: int) -> np.ndarray:
    """0 / -0.5 pulses on eighths of the sample (first matching branch wins)."""
    t = np.arange(1, T + 1)
    zero = (t <= T / 8) | ((t > 3 * T / 8) & (t <= 5 * T / 8)) | (t > 7 * T / 8)
    return np.where(zero, 0.0, -0.5)


def _example2_path(rng, kind, T, phi=0.98):
    innov = (1.0 - phi) * 0.15
    if kind in (0, 1):
        path = _ar_path(rng, T, phi, innov, 0.0, innov / (1.0 - phi * phi))
        if kind == 1:
            path[T // 2:] = 0.0
        return path
    if kind == 2:
        return step_process(T)
    return np.zeros(T)


def generate_example2(seed: int, q: int = 10, T: int = 240):
    """Recursive (Cholesky) regressions with randomly assigned coefficient processes.

    Returns the system and ``q - 1`` datasets; dataset ``i`` regresses series
    ``i + 1`` on the series before it.
    """
    rng = np.random.default_rng(seed)
    B = np.zeros((T, q, q))
    process = np.full((q, q), -1, dtype=int)
    for i in range(1, q):
        for j in range(i):
            kind = int(rng.integers(4))
            process[i, j] = kind
            B[:, i, j] = _example2_path(rng, kind, T)
    eps = 0.25 * rng.standard_normal((T, q))
    ys = np.zeros((T, q))
    for i in range(q):
        ys[:, i] = np.sum(B[:, i, :i] * ys[:, :i], axis=1) + eps[:, i]
    system = CholeskySystem(B=B, series=ys, eps=eps, process=process)
    datasets = [
        Dataset(y=ys[:, i], X=ys[:, :i].copy(), truth=B[:, i, :i].copy(),
                meta={"generator": "example2", "seed": int(seed), "equation": i + 1},
                names=[f"y{j + 1}" for j in range(i)])
        for i in range(1, q)
    ]
    return system, datasets


def replicate(generator: Callable[[int], Dataset], n_rep: int, base_seed: int) -> list:
    if n_rep < 1:
        raise ValueError("n_rep must be at least 1")
    seeds = np.random.SeedSequence(base_seed).generate_state(n_rep)
    return [generator(int(s)) for s in seeds]
