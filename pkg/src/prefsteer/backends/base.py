"""Uniform contract for next-token log-probability sources.

A backend answers one question: given a query, the generated prefix, and an
optional conditioning (a single preference or the fixed multi-preference
anchor), what is the next-token log distribution? Three implementations are
provided: an exact lookup table, a smoothed n-gram model, and a remote
top-k logprob service.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass

from ..distributions import LogDistribution, Vocab
from ..errors import BatchError

# Reserved conditioning-tag names used in table fixtures.
BASE_TAG = "base"
ANCHOR_TAG = "anchor"


@dataclass(frozen=True)
class Conditioning:
    """What a distribution is conditioned on, in backend-neutral form.

    ``tag`` is a stable short key (a preference id, or "anchor") used by the
    table backend and for caching. ``text`` is the rendered natural-language
    conditioning prompt consumed by remote backends. ``parts`` lists the
    (preference id, weight) pairs the conditioning is composed of, which the
    n-gram backend uses to mix its per-preference corpora; a single
    preference is the pair (id, 1.0).
    """

    tag: str
    text: str
    parts: tuple[tuple[str, float], ...] = ()

    @staticmethod
    def for_preference(pref_id: str, text: str) -> "Conditioning":
        return Conditioning(tag=pref_id, text=text, parts=((pref_id, 1.0),))

    @staticmethod
    def for_anchor(text: str, parts: tuple[tuple[str, float], ...]) -> "Conditioning":
        return Conditioning(tag=ANCHOR_TAG, text=text, parts=parts)


@dataclass(frozen=True)
class ConditioningContext:
    """Arguments of one next-token query: query text, prefix, conditioning.

    ``conditioning`` is None for the plain unconditioned distribution.
    """

    query: str
    prefix: tuple[int, ...]
    conditioning: Conditioning | None = None

    @property
    def tag(self) -> str:
        return self.conditioning.tag if self.conditioning is not None else BASE_TAG


@dataclass(frozen=True)
class BackendCapabilities:
    full_vocab: bool
    max_candidates: int
    supports_batch: bool

    def __post_init__(self):
        if not self.full_vocab and self.max_candidates < 2:
            raise ValueError("truncated backends must return at least 2 candidates")


class PolicyBackend(abc.ABC):
    """Read-only source of next-token log distributions.

    Implementations must be safe under concurrent calls for the same decode
    step; the engine may issue the K+2 conditionals of one step in parallel.
    """

    vocab: Vocab
    capabilities: BackendCapabilities

    @abc.abstractmethod
    def next_token_logprobs(self, ctx: ConditioningContext) -> LogDistribution:
        """Return a normalized distribution for one conditioning context."""

    def batch_logprobs(self, ctxs: list[ConditioningContext]) -> list[LogDistribution]:
        """Element-wise identical to sequential next_token_logprobs calls."""
        out = []
        for i, ctx in enumerate(ctxs):
            try:
                out.append(self.next_token_logprobs(ctx))
            except Exception as err:
                raise BatchError(i, str(err)) from err
        return out
