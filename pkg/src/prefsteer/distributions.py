"""Numerically stable algebra over discrete token distributions in log space.

All probability mass manipulation in the engine goes through LogDistribution:
normalization, KL divergence, support alignment across truncated backends,
and sampling. Values are immutable after construction and every operation is
pure, so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    EmptyUnion,
    InvalidStrategyParam,
    NonFiniteInput,
    SupportMismatch,
)

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class Vocab:
    """An explicit token inventory: dense integer ids plus surface forms."""

    tokens: tuple[tuple[int, str], ...]
    eos_id: int

    def __post_init__(self):
        ids = [tid for tid, _ in self.tokens]
        if sorted(ids) != list(range(len(ids))):
            raise ValueError("token ids must be unique and dense in [0, |V|)")
        if self.eos_id not in set(ids):
            raise ValueError(f"eos_id {self.eos_id} is not a member of the vocab")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def ids(self) -> tuple[int, ...]:
        return tuple(tid for tid, _ in self.tokens)

    def surface(self, token_id: int) -> str:
        for tid, text in self.tokens:
            if tid == token_id:
                return text
        raise KeyError(token_id)

    def id_of(self, surface: str) -> int:
        for tid, text in self.tokens:
            if text == surface:
                return tid
        raise KeyError(surface)

    def detokenize(self, token_ids: Iterable[int], skip_eos: bool = True) -> str:
        parts = []
        for tid in token_ids:
            if skip_eos and tid == self.eos_id:
                continue
            parts.append(self.surface(tid))
        return " ".join(parts)

    @staticmethod
    def from_surfaces(surfaces: Sequence[str], eos_surface: str) -> "Vocab":
        """Build a vocab from surface strings; eos is appended if absent."""
        uniq = list(dict.fromkeys(surfaces))
        if eos_surface not in uniq:
            uniq.append(eos_surface)
        tokens = tuple((i, s) for i, s in enumerate(uniq))
        return Vocab(tokens=tokens, eos_id=uniq.index(eos_surface))


@dataclass(frozen=True, eq=False)
class LogDistribution:
    """Log-probability vector over an explicit candidate token set.

    ``logp[i]`` is the log-probability of ``support[i]``. Entries must be
    finite; absent tokens are represented by an explicit floor value applied
    before construction, never by -inf.
    """

    support: tuple[int, ...]
    logp: np.ndarray
    _index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        arr = np.asarray(self.logp, dtype=np.float64).copy()
        if arr.ndim != 1 or arr.shape[0] != len(self.support):
            raise ValueError("logp must be a 1-d vector aligned to support")
        if len(set(self.support)) != len(self.support):
            raise ValueError("support entries must be unique")
        if len(self.support) < 1:
            raise ValueError("support must contain at least one token")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("log-probabilities must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "logp", arr)
        object.__setattr__(
            self, "_index", {tid: i for i, tid in enumerate(self.support)}
        )

    def logprob(self, token_id: int) -> float:
        return float(self.logp[self._index[token_id]])

    def prob(self, token_id: int) -> float:
        return float(np.exp(self.logp[self._index[token_id]]))

    def contains(self, token_id: int) -> bool:
        return token_id in self._index

    def probs(self) -> np.ndarray:
        return np.exp(self.logp)

    def is_normalized(self, tol: float = NORMALIZATION_TOL) -> bool:
        return abs(float(logsumexp(self.logp))) <= tol


@dataclass(frozen=True)
class SamplingStrategy:
    """Token-selection rule: greedy argmax, temperature, or nucleus."""

    kind: str
    value: float | None = None

    @staticmethod
    def greedy() -> "SamplingStrategy":
        return SamplingStrategy(kind="greedy")

    @staticmethod
    def temperature(t: float) -> "SamplingStrategy":
        return SamplingStrategy(kind="temperature", value=t)

    @staticmethod
    def top_p(p: float) -> "SamplingStrategy":
        return SamplingStrategy(kind="top_p", value=p)


def normalize_log(d: LogDistribution) -> LogDistribution:
    """Shift logp by a single additive constant so the mass sums to one."""
    shift = float(logsumexp(d.logp))
    return LogDistribution(support=d.support, logp=d.logp - shift)


def entropy(d: LogDistribution) -> float:
    """Shannon entropy in nats of a normalized distribution."""
    p = d.probs()
    return float(-np.sum(p * d.logp))


def kl_divergence(p: LogDistribution, q: LogDistribution) -> float:
    """KL(p || q) over a shared support order, clamped to zero from below.

    Both inputs must be normalized on an identical support order; floored
    entries keep the result finite by construction.
    """
    if p.support != q.support:
        raise SupportMismatch("KL requires identical support order")
    val = float(np.sum(np.exp(p.logp) * (p.logp - q.logp)))
    if val < -NORMALIZATION_TOL:
        raise ValueError(f"KL evaluated to {val}; inputs are not normalized")
    return max(val, 0.0)


def align_supports(
    ds: Sequence[LogDistribution],
    floor: float | None = None,
    floor_offset: float = 5.0,
) -> list[LogDistribution]:
    """Re-express distributions on their union support and renormalize.

    Tokens absent from an input receive ``floor`` log mass before
    renormalization; by default the floor sits ``floor_offset`` nats below
    the smallest observed log-probability, keeping absent tokens strictly
    dominated without introducing infinities. The union support is in
    ascending token-id order.
    """
    if not ds:
        raise EmptyUnion("no distributions to align")
    union = sorted(set().union(*(d.support for d in ds)))
    if not union:
        raise EmptyUnion("union support is empty")
    min_obs = min(float(np.min(d.logp)) for d in ds)
    if floor is None:
        if floor_offset <= 0:
            raise ValueError(f"floor_offset must be > 0, got {floor_offset}")
        floor = min_obs - floor_offset
    elif floor >= min_obs:
        raise ValueError(
            f"floor {floor} must sit below the minimum observed logp {min_obs}"
        )
    out = []
    for d in ds:
        logp = np.full(len(union), floor, dtype=np.float64)
        for i, tid in enumerate(union):
            if d.contains(tid):
                logp[i] = d.logprob(tid)
        out.append(normalize_log(LogDistribution(support=tuple(union), logp=logp)))
    return out


def sample(d: LogDistribution, strategy: SamplingStrategy, seed: int = 0) -> int:
    """Draw one token id from a normalized distribution.

    Greedy returns the argmax with lowest-token-id tie-breaking. Temperature
    and nucleus draws are reproducible under a fixed seed. The nucleus is the
    maximal descending-probability prefix whose inclusive cumulative mass
    stays within ``p``, always keeping the top token.
    """
    if strategy.kind == "greedy":
        best = np.max(d.logp)
        tied = [tid for tid, lp in zip(d.support, d.logp) if lp == best]
        return min(tied)

    rng = np.random.default_rng(seed)
    if strategy.kind == "temperature":
        t = strategy.value
        if t is None or t <= 0:
            raise InvalidStrategyParam(f"temperature must be > 0, got {t}")
        scaled = d.logp / t
        probs = np.exp(scaled - logsumexp(scaled))
        probs = probs / probs.sum()
        return int(rng.choice(d.support, p=probs))

    if strategy.kind == "top_p":
        p = strategy.value
        if p is None or not (0.0 < p <= 1.0):
            raise InvalidStrategyParam(f"top_p must be in (0, 1], got {p}")
        # Sort by probability descending, token id ascending for determinism.
        order = sorted(range(len(d.support)), key=lambda i: (-d.logp[i], d.support[i]))
        probs = np.exp(d.logp)
        nucleus = [order[0]]
        cum = probs[order[0]]
        for i in order[1:]:
            if cum + probs[i] > p + 1e-12:
                break
            nucleus.append(i)
            cum += probs[i]
        sub = probs[nucleus] / probs[nucleus].sum()
        chosen = rng.choice(len(nucleus), p=sub)
        return int(d.support[nucleus[chosen]])

    raise InvalidStrategyParam(f"unknown sampling strategy {strategy.kind!r}")
