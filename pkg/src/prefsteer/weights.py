"""Closed-form solution of the anchored adversarial weight subproblem.

At each decode step the weight profile is rebalanced against the cumulative
rewards: an adversary shifts mass toward the worst-served objectives, while a
KL term anchors the result to the user's prior profile. The minimizer of

    F(w) = sum_k w_k * R_k + tau * KL(w || prior)

over the simplex has the closed form w*_k = prior_k * exp(-R_k / tau) / Z.
``optimize_weights`` evaluates it with a max-shifted exponent so large
cumulative rewards cannot overflow. ``oracle_optimize_weights`` minimizes
F numerically without using the closed form, as an independent check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import xlogy

from .errors import AllZeroPrior, DimensionMismatch, NoConvergence, NonPositiveTau

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class WeightVector:
    """A point on the probability simplex over K preferences."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).copy()
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("weights must form a non-empty flat vector")
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise ValueError("weights must be finite and >= 0")
        if abs(arr.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"weights must sum to 1, got {arr.sum()!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)

    def __getitem__(self, k: int) -> float:
        return float(self.values[k])

    @staticmethod
    def uniform(k: int) -> "WeightVector":
        return WeightVector(np.full(k, 1.0 / k))

    @staticmethod
    def normalized(raw: Sequence[float]) -> "WeightVector":
        """Rescale nonnegative raw weights onto the simplex."""
        arr = np.asarray(raw, dtype=np.float64)
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            raise ValueError("raw weights must be finite and >= 0")
        total = arr.sum()
        if total <= 0:
            raise AllZeroPrior("cannot normalize an all-zero weight profile")
        return WeightVector(arr / total)


def weight_objective(w: np.ndarray, prior: np.ndarray, rewards: np.ndarray, tau: float) -> float:
    """F(w) = <w, R> + tau * KL(w || prior), with 0*log(0) = 0."""
    kl = float(np.sum(xlogy(w, w)) - np.sum(xlogy(w, prior)))
    return float(w @ rewards + tau * kl)


def optimize_weights(prior: WeightVector, rewards: Sequence[float], tau: float) -> WeightVector:
    """Closed-form minimizer of the anchored weight subproblem.

    Zero-prior preferences stay at zero weight: they are outside the KL
    anchor's support and the minimizer never moves mass onto them.
    """
    if tau <= 0 or not np.isfinite(tau):
        raise NonPositiveTau(f"tau must be finite and > 0, got {tau}")
    r = np.asarray(rewards, dtype=np.float64)
    p = prior.values
    if r.shape != p.shape:
        raise DimensionMismatch(f"{r.size} rewards for {p.size} preferences")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    support = p > 0
    if not np.any(support):
        raise AllZeroPrior("prior has no support")
    exponents = np.log(p[support]) - r[support] / tau
    shifted = np.exp(exponents - exponents.max())
    out = np.zeros_like(p)
    out[support] = shifted / shifted.sum()
    return WeightVector(out)


@lru_cache(maxsize=8)
def _simplex_grid(k: int, cells: int) -> np.ndarray:
    """All points of the simplex lattice {c/cells : c in N^k, sum c = cells}.

    Cached and returned read-only: oracle sweeps hit the same lattice
    hundreds of times.
    """
    combos = itertools.combinations(range(cells + k - 1), k - 1)
    dividers = np.fromiter(
        (x for combo in combos for x in combo), dtype=np.int64
    ).reshape(-1, k - 1)
    full = np.empty((dividers.shape[0], k + 1), dtype=np.int64)
    full[:, 0] = -1
    full[:, 1:-1] = dividers
    full[:, -1] = cells + k - 1
    counts = np.diff(full, axis=1) - 1
    grid = counts / float(cells)
    grid.setflags(write=False)
    return grid


def oracle_optimize_weights(
    prior: WeightVector,
    rewards: Sequence[float],
    tau: float,
    resolution: float = 1e-3,
    mode: str = "grid",
) -> WeightVector:
    """Numerically minimize F over the simplex, ignoring the closed form.

    Grid mode enumerates a simplex lattice at ``resolution`` and then zooms
    twice around the incumbent, so it is only practical for K <= 4. Descent
    mode runs BFGS on a softmax parameterization and handles any K.
    """
    if tau <= 0 or not np.isfinite(tau):
        raise NonPositiveTau(f"tau must be finite and > 0, got {tau}")
    r_full = np.asarray(rewards, dtype=np.float64)
    p_full = prior.values
    if r_full.shape != p_full.shape:
        raise DimensionMismatch(f"{r_full.size} rewards for {p_full.size} preferences")
    support = p_full > 0
    if not np.any(support):
        raise AllZeroPrior("prior has no support")
    # Zero-prior coordinates are pinned at zero; search only the support.
    p = p_full[support]
    r = r_full[support]
    k = int(support.sum())

    if k == 1:
        w = np.zeros_like(p_full)
        w[support] = 1.0
        return WeightVector(w)

    if mode == "grid":
        cells = max(2, int(round(1.0 / resolution)))
        if (cells + 1) ** (k - 1) > 5e7:
            raise ValueError(
                f"grid of {cells + 1}^{k - 1} points is too large; use descent mode"
            )
        grid = _simplex_grid(k, cells)
        scores = grid @ r + tau * (
            np.sum(xlogy(grid, grid), axis=1) - xlogy(grid, p).sum(axis=1)
        )
        best = grid[int(np.argmin(scores))]
        # Two local zooms tighten the lattice answer well below one cell.
        span = 1.0 / cells
        for _ in range(2):
            span /= 8.0
            offsets = np.array(
                list(itertools.product(np.linspace(-8, 8, 17) * span, repeat=k - 1))
            )
            cand = np.empty((offsets.shape[0], k))
            cand[:, :-1] = best[:-1] + offsets
            cand[:, -1] = 1.0 - cand[:, :-1].sum(axis=1)
            cand = cand[np.all(cand >= 0.0, axis=1)]
            scores = cand @ r + tau * (
                np.sum(xlogy(cand, cand), axis=1) - xlogy(cand, p).sum(axis=1)
            )
            best = cand[int(np.argmin(scores))]
        w = np.zeros_like(p_full)
        w[support] = best
        return WeightVector(w / w.sum())

    if mode == "descent":
        def objective(z: np.ndarray):
            z = z - z.max()
            w = np.exp(z)
            w /= w.sum()
            g = r + tau * (np.log(np.maximum(w, 1e-300) / p) + 1.0)
            val = weight_objective(w, p, r, tau)
            return val, w * (g - w @ g)

        result = minimize(
            objective,
            np.log(p),
            jac=True,
            method="BFGS",
            options={"maxiter": 500, "gtol": 1e-12},
        )
        # BFGS may stop on precision loss at the optimum; only a genuinely
        # unconverged gradient counts as failure.
        if not np.all(np.isfinite(result.x)) or (
            not result.success and np.linalg.norm(result.jac) > 1e-6
        ):
            raise NoConvergence(f"descent did not converge: {result.message}")
        z = result.x - result.x.max()
        w_sup = np.exp(z)
        w_sup /= w_sup.sum()
        w = np.zeros_like(p_full)
        w[support] = w_sup
        return WeightVector(w)

    raise ValueError(f"unknown oracle mode {mode!r}")
