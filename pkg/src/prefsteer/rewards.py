"""Token-level reward recovery from log-probability ratios.

Each preference k, described in natural language, induces a conditioned
next-token distribution. The reward of the accepted token is the scaled
log-ratio between that conditioned probability and the base probability, and
cumulative rewards over the generated prefix are plain sums of these scalars.
Summed over a whole sequence the token rewards telescope into the
sequence-level log-probability ratio, which is what makes the per-token
bookkeeping trustworthy.

Rewards are recorded from the distributions as seen when the token was
accepted. Re-deriving them later from re-queried or re-floored distributions
is forbidden; only the recorded scalars persist.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .distributions import LogDistribution
from .errors import DimensionMismatch, EmptyInput, TokenNotInSupport


@dataclass(frozen=True)
class PreferenceSpec:
    """One steering objective: identifier, description, and prior weight."""

    id: str
    description: str
    initial_weight: float

    def __post_init__(self):
        if not self.id:
            raise ValueError("preference id must be non-empty")
        if not self.description or not self.description.strip():
            raise ValueError(f"preference {self.id!r} has an empty description")
        if not np.isfinite(self.initial_weight) or self.initial_weight < 0:
            raise ValueError(
                f"preference {self.id!r} initial_weight must be finite and >= 0, "
                f"got {self.initial_weight}"
            )


@dataclass(frozen=True, eq=False)
class RewardState:
    """Cumulative per-preference rewards over the accepted prefix."""

    cumulative: np.ndarray
    step_count: int

    def __post_init__(self):
        arr = np.asarray(self.cumulative, dtype=np.float64).copy()
        if arr.ndim != 1:
            raise ValueError("cumulative must be a flat vector")
        arr.setflags(write=False)
        object.__setattr__(self, "cumulative", arr)

    @staticmethod
    def fresh(k: int) -> "RewardState":
        return RewardState(np.zeros(k), 0)


def token_rewards(
    base: LogDistribution,
    conds: Sequence[LogDistribution],
    chosen: int,
    beta: float = 1.0,
) -> np.ndarray:
    """Reward of the chosen token under each preference: beta * delta-logp."""
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if not base.contains(chosen):
        raise TokenNotInSupport(f"token {chosen} missing from base support")
    base_lp = base.logprob(chosen)
    out = np.empty(len(conds))
    for k, cond in enumerate(conds):
        if not cond.contains(chosen):
            raise TokenNotInSupport(
                f"token {chosen} missing from conditional {k} support"
            )
        out[k] = beta * (cond.logprob(chosen) - base_lp)
    return out


def accumulate(state: RewardState, step: Sequence[float]) -> RewardState:
    step_arr = np.asarray(step, dtype=np.float64)
    if step_arr.shape != state.cumulative.shape:
        raise DimensionMismatch(
            f"step has shape {step_arr.shape}, state has {state.cumulative.shape}"
        )
    return RewardState(state.cumulative + step_arr, state.step_count + 1)


def sequence_reward(pairs: Sequence[tuple[float, float]], beta: float = 1.0) -> float:
    """Whole-sequence reward from per-token (base_logp, cond_logp) records.

    Equals the telescoped log-ratio of sequence probabilities because the
    shared query/prefix conditioning cancels term by term.
    """
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if len(pairs) == 0:
        raise EmptyInput("sequence reward needs at least one token record")
    arr = np.asarray(pairs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DimensionMismatch("expected (base_logp, cond_logp) pairs")
    return float(beta * (arr[:, 1].sum() - arr[:, 0].sum()))
