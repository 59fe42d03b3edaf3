"""Anchored fusion and closed-form FTRL refinement of the step distribution.

The fused distribution multiplies the anchor-conditioned distribution by each
preference-conditioned distribution raised to its current weight. A short
follow-the-regularized-leader loop then pushes the result away from the base
distribution (amplifying the preference signal) while a KL term keeps it
tethered to the fused anchor. Every update is available in closed form, so
the loop is T cheap vector operations per decode step, not an inner
optimization.

Update convention: the utility of step j is computed from the policy produced
at step j, cached once into the running sum, and never recomputed from later
policies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, xlogy

from .distributions import LogDistribution, normalize_log
from .errors import DimensionMismatch, NoConvergence, SupportMismatch
from .weights import WeightVector, _simplex_grid


@dataclass(frozen=True)
class FtrlConfig:
    """Loop length and the three scalars of the regularized update."""

    steps: int = 80
    alpha: float = 0.5
    lam: float = 1.0
    eta: float = 10.0

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError(f"steps must be >= 0, got {self.steps}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")


@dataclass(frozen=True, eq=False)
class FtrlState:
    """Running quantities of the update loop at step t.

    ``utility_sum`` holds the cached utilities of steps 1..t-1; ``current``
    is the policy produced at step t-1 (the fused anchor before step 1).
    """

    utility_sum: np.ndarray
    current: LogDistribution
    anchor: LogDistribution
    base: LogDistribution
    t: int

    def __post_init__(self):
        arr = np.asarray(self.utility_sum, dtype=np.float64).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "utility_sum", arr)
        if self.t < 1:
            raise ValueError(f"step index must be >= 1, got {self.t}")
        if arr.shape[0] != len(self.anchor.support):
            raise DimensionMismatch("utility_sum is not aligned to the support")


def _require_same_support(*ds: LogDistribution) -> None:
    first = ds[0].support
    for d in ds[1:]:
        if d.support != first:
            raise SupportMismatch("operands must share one aligned support")


def fuse(
    anchor_cond: LogDistribution,
    pref_conds: Sequence[LogDistribution],
    weights: WeightVector,
) -> LogDistribution:
    """Weighted-product fusion around the anchor-conditioned distribution."""
    if len(pref_conds) != len(weights):
        raise DimensionMismatch(
            f"{len(pref_conds)} conditionals for {len(weights)} weights"
        )
    _require_same_support(anchor_cond, *pref_conds)
    logp = anchor_cond.logp.copy()
    for w, cond in zip(weights.values, pref_conds):
        logp += w * cond.logp
    return normalize_log(LogDistribution(anchor_cond.support, logp))


def utility(pi_j: LogDistribution, base: LogDistribution, alpha: float) -> np.ndarray:
    """Per-token divergence payoff alpha * (log pi_j - log base)."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    _require_same_support(pi_j, base)
    return alpha * (pi_j.logp - base.logp)


def initial_state(anchor: LogDistribution, base: LogDistribution) -> FtrlState:
    _require_same_support(anchor, base)
    return FtrlState(
        utility_sum=np.zeros(len(anchor.support)),
        current=anchor,
        anchor=anchor,
        base=base,
        t=1,
    )


def ftrl_step(state: FtrlState, cfg: FtrlConfig) -> tuple[LogDistribution, FtrlState]:
    """One closed-form update; returns pi_t and the advanced state."""
    coeff = (state.t - 1) * cfg.lam * cfg.eta
    raw = (
        cfg.eta * state.utility_sum + coeff * state.anchor.logp + state.current.logp
    ) / (coeff + 1.0)
    pi_t = normalize_log(LogDistribution(state.anchor.support, raw))
    advanced = FtrlState(
        utility_sum=state.utility_sum + utility(pi_t, state.base, cfg.alpha),
        current=pi_t,
        anchor=state.anchor,
        base=state.base,
        t=state.t + 1,
    )
    return pi_t, advanced


def run_online_optimization(
    anchor: LogDistribution, base: LogDistribution, cfg: FtrlConfig
) -> LogDistribution:
    """Run the full T-step loop seeded with the fused anchor; T=0 is a no-op."""
    state = initial_state(anchor, base)
    pi = anchor
    for _ in range(cfg.steps):
        pi, state = ftrl_step(state, cfg)
    return pi


def ftrl_objective(
    p: np.ndarray,
    history: Sequence[np.ndarray],
    pi_prev: LogDistribution,
    anchor: LogDistribution,
    cfg: FtrlConfig,
) -> float:
    """The regularized-leader objective maximized at each update step.

    sum_j [ <p, u_j> - lam * KL(p || anchor) ] - (1/eta) * KL(p || pi_prev)
    """
    logp_anchor = anchor.logp
    logp_prev = pi_prev.logp
    ent = np.sum(xlogy(p, p))
    kl_anchor = ent - float(p @ logp_anchor)
    kl_prev = ent - float(p @ logp_prev)
    val = -kl_prev / cfg.eta
    for u in history:
        val += float(p @ u) - cfg.lam * kl_anchor
    return val


def oracle_ftrl_step(
    history: Sequence[np.ndarray],
    pi_prev: LogDistribution,
    anchor: LogDistribution,
    cfg: FtrlConfig,
    resolution: float = 1e-3,
    mode: str = "grid",
) -> LogDistribution:
    """Maximize the update objective directly, without the closed form.

    Grid mode sweeps a simplex lattice with two local zooms (practical for
    supports of <= 4 tokens); ascent mode runs BFGS on softmax parameters
    and handles wider supports.
    """
    _require_same_support(pi_prev, anchor)
    n = len(anchor.support)
    for u in history:
        if np.asarray(u).shape[0] != n:
            raise DimensionMismatch("history utility is not aligned to the support")

    if mode == "grid":
        cells = max(2, int(round(1.0 / resolution)))
        if (cells + 1) ** (n - 1) > 5e7:
            raise ValueError(
                f"grid of {cells + 1}^{n - 1} points is too large; use ascent mode"
            )
        grid = _simplex_grid(n, cells)
        scores = _batched_objective(grid, history, pi_prev, anchor, cfg)
        best = grid[int(np.argmax(scores))]
        span = 1.0 / cells
        for _ in range(2):
            span /= 8.0
            offsets = np.array(
                list(itertools.product(np.linspace(-8, 8, 17) * span, repeat=n - 1))
            )
            cand = np.empty((offsets.shape[0], n))
            cand[:, :-1] = best[:-1] + offsets
            cand[:, -1] = 1.0 - cand[:, :-1].sum(axis=1)
            cand = cand[np.all(cand >= 0.0, axis=1)]
            scores = _batched_objective(cand, history, pi_prev, anchor, cfg)
            best = cand[int(np.argmax(scores))]
        best = np.maximum(best, 1e-300)
        return normalize_log(LogDistribution(anchor.support, np.log(best)))

    if mode == "ascent":
        def negative(z: np.ndarray):
            z = z - z.max()
            p = np.exp(z)
            p /= p.sum()
            val = ftrl_objective(p, history, pi_prev, anchor, cfg)
            steps = len(history)
            # dG/dp, then chain through softmax.
            g = np.zeros(n)
            for u in history:
                g += np.asarray(u, dtype=np.float64)
            common = np.log(np.maximum(p, 1e-300)) + 1.0
            g -= steps * cfg.lam * (common - anchor.logp)
            g -= (common - pi_prev.logp) / cfg.eta
            return -val, -(p * (g - p @ g))

        result = minimize(
            negative,
            pi_prev.logp.copy(),
            jac=True,
            method="BFGS",
            options={"maxiter": 500, "gtol": 1e-12},
        )
        if not np.all(np.isfinite(result.x)) or (
            not result.success and np.linalg.norm(result.jac) > 1e-6
        ):
            raise NoConvergence(f"ascent did not converge: {result.message}")
        z = result.x - result.x.max()
        return normalize_log(LogDistribution(anchor.support, z))

    raise ValueError(f"unknown oracle mode {mode!r}")


def _batched_objective(
    points: np.ndarray,
    history: Sequence[np.ndarray],
    pi_prev: LogDistribution,
    anchor: LogDistribution,
    cfg: FtrlConfig,
) -> np.ndarray:
    ent = np.sum(xlogy(points, points), axis=1)
    kl_anchor = ent - points @ anchor.logp
    kl_prev = ent - points @ pi_prev.logp
    vals = -kl_prev / cfg.eta
    for u in history:
        vals = vals + points @ np.asarray(u, dtype=np.float64) - cfg.lam * kl_anchor
    return vals
