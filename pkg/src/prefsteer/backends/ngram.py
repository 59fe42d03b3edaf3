"""Smoothed n-gram backend.

A tiny count-based language model stands in for a promptable policy at desk
scale. Preference conditioning is corpus interpolation: each preference id
owns a corpus, and the conditioned distribution mixes the base model with the
preference model(s). An n-gram model cannot follow instructions, but the
interpolation plays the same mathematical role as a preference prompt: it
shifts probability mass toward preference-typical tokens.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..distributions import LogDistribution, Vocab, normalize_log
from ..errors import UnknownContext
from .base import BackendCapabilities, ConditioningContext, PolicyBackend

EOS_SURFACE = "</s>"


def tokenize_corpus(text: str) -> list[list[str]]:
    """Whitespace tokenization, one document per line, blank lines skipped."""
    docs: list[list[str]] = []
    for line in text.splitlines():
        words = line.split()
        if words:
            docs.append(words)
    return docs


@dataclass
class _CountModel:
    """N-gram counts for one corpus, all context lengths 0..order-1."""

    order: int
    # context tuple -> Counter of following token ids
    follows: dict[tuple[int, ...], Counter] = field(default_factory=dict)
    totals: dict[tuple[int, ...], int] = field(default_factory=dict)

    def add_document(self, token_ids: Sequence[int]) -> None:
        for i, tid in enumerate(token_ids):
            for ctx_len in range(self.order):
                if ctx_len > i:
                    break
                ctx = tuple(token_ids[i - ctx_len : i])
                bucket = self.follows.get(ctx)
                if bucket is None:
                    bucket = Counter()
                    self.follows[ctx] = bucket
                bucket[tid] += 1
                self.totals[ctx] = self.totals.get(ctx, 0) + 1

    def probs(self, context: Sequence[int], delta: float, vocab_size: int) -> np.ndarray:
        """Add-delta smoothed next-token probabilities over the full vocab.

        Uses the longest observed suffix of ``context`` (down to the empty
        context) so unseen histories degrade gracefully instead of going
        uniform.
        """
        ctx = tuple(context[max(0, len(context) - (self.order - 1)) :])
        while ctx and ctx not in self.totals:
            ctx = ctx[1:]
        bucket = self.follows.get(ctx, Counter())
        total = self.totals.get(ctx, 0)
        counts = np.full(vocab_size, delta, dtype=np.float64)
        for tid, c in bucket.items():
            counts[tid] += c
        return counts / (total + delta * vocab_size)


class NGramBackend(PolicyBackend):
    """Add-delta smoothed n-gram model with per-preference corpus mixing.

    The conditioned distribution is (1-gamma)*p_base + gamma*p_pref where
    p_pref comes from the corpus registered for the preference id. Anchor
    conditioning mixes several preference corpora with the anchor weights
    before interpolating.
    """

    def __init__(
        self,
        base_corpus: str,
        preference_corpora: Mapping[str, str],
        order: int = 2,
        delta: float = 1.0,
        gamma: float = 0.7,
        vocab: Vocab | None = None,
    ):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        if delta <= 0:
            raise ValueError(f"smoothing constant must be > 0, got {delta}")
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"interpolation coefficient must be in [0, 1], got {gamma}")
        self.order = order
        self.delta = float(delta)
        self.gamma = float(gamma)

        base_docs = tokenize_corpus(base_corpus)
        pref_docs = {pid: tokenize_corpus(text) for pid, text in preference_corpora.items()}
        if vocab is None:
            surfaces = {w for doc in base_docs for w in doc}
            for docs in pref_docs.values():
                surfaces.update(w for doc in docs for w in doc)
            surfaces.add(EOS_SURFACE)
            vocab = Vocab.from_surfaces(sorted(surfaces), EOS_SURFACE)
        self.vocab = vocab

        self._base = self._count(base_docs)
        self._prefs = {pid: self._count(docs) for pid, docs in pref_docs.items()}
        self.capabilities = BackendCapabilities(
            full_vocab=True, max_candidates=len(self.vocab), supports_batch=True
        )

    def _count(self, docs: list[list[str]]) -> _CountModel:
        model = _CountModel(order=self.order)
        for doc in docs:
            model.add_document([self.vocab.id_of(w) for w in doc])
        return model

    @classmethod
    def from_files(
        cls,
        base_path: str | Path,
        preference_paths: Mapping[str, str | Path],
        **kwargs,
    ) -> "NGramBackend":
        base = Path(base_path).read_text(encoding="utf-8")
        prefs = {pid: Path(p).read_text(encoding="utf-8") for pid, p in preference_paths.items()}
        return cls(base, prefs, **kwargs)

    @property
    def preference_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._prefs))

    def _context_ids(self, ctx: ConditioningContext) -> list[int]:
        # Query words ground the history; out-of-vocab words carry no count
        # signal and are dropped rather than rejected.
        ids = [self.vocab.id_of(w) for w in ctx.query.split() if self._known(w)]
        ids.extend(ctx.prefix)
        return ids

    def _known(self, surface: str) -> bool:
        try:
            self.vocab.id_of(surface)
        except KeyError:
            return False
        return True

    def _preference_probs(self, parts: Sequence[tuple[str, float]], history: list[int]) -> np.ndarray:
        weights = np.array([max(0.0, w) for _, w in parts], dtype=np.float64)
        if weights.sum() <= 0.0:
            raise ValueError("conditioning weights must have positive mass")
        weights = weights / weights.sum()
        mixed = np.zeros(len(self.vocab), dtype=np.float64)
        for (pid, _), w in zip(parts, weights):
            model = self._prefs.get(pid)
            if model is None:
                raise UnknownContext(f"no corpus registered for preference {pid!r}")
            mixed += w * model.probs(history, self.delta, len(self.vocab))
        return mixed

    def next_token_logprobs(self, ctx: ConditioningContext) -> LogDistribution:
        history = self._context_ids(ctx)
        p_base = self._base.probs(history, self.delta, len(self.vocab))
        if ctx.conditioning is None:
            probs = p_base
        else:
            parts = ctx.conditioning.parts
            if not parts:
                raise UnknownContext(
                    f"conditioning {ctx.conditioning.tag!r} names no preference corpora"
                )
            p_pref = self._preference_probs(parts, history)
            probs = (1.0 - self.gamma) * p_base + self.gamma * p_pref
        support = tuple(range(len(self.vocab)))
        return normalize_log(LogDistribution(support, np.log(probs)))
