"""Exact lookup-table backend: an enumerable conditional-probability fixture.

Every (prefix, conditioning-tag) pair maps to a stored distribution, which
makes sequence probabilities exactly computable and turns the whole decode
pipeline into something a hand oracle can replay. Fixture files are JSON
maps ``{"context_key": {"token_id": logprob, ...}}`` with
``context_key = ",".join(prefix ids) + "|" + tag``; a key with prefix "*"
declares the default distribution for that tag. The unconditioned context
uses the reserved tag "base" and the multi-preference anchor the tag
"anchor".
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from ..distributions import LogDistribution, Vocab, normalize_log
from ..errors import UnknownContext
from .base import BackendCapabilities, ConditioningContext, PolicyBackend

DEFAULT_PREFIX = "*"


def context_key(prefix: tuple[int, ...], tag: str) -> str:
    return ",".join(str(t) for t in prefix) + "|" + tag


def load_table_fixture(path: str | Path) -> dict[str, dict[int, float]]:
    """Parse a fixture file into {context_key: {token_id: logprob}}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return {
        key: {int(tid): float(lp) for tid, lp in entry.items()}
        for key, entry in raw.items()
    }


def load_vocab_fixture(path: str | Path) -> Vocab:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    tokens = tuple((int(tid), str(s)) for tid, s in raw["tokens"])
    return Vocab(tokens=tokens, eos_id=int(raw["eos_id"]))


class TableBackend(PolicyBackend):
    """Serves stored distributions keyed by (prefix, conditioning tag).

    Stored entries must be normalized within 1e-6; they are re-normalized
    exactly at load so downstream invariants hold to machine precision.
    """

    def __init__(self, vocab: Vocab, table: dict[str, dict[int, float]]):
        self.vocab = vocab
        self.capabilities = BackendCapabilities(
            full_vocab=True, max_candidates=len(vocab), supports_batch=True
        )
        self._table: dict[str, LogDistribution] = {}
        valid_ids = set(vocab.ids)
        for key, entry in table.items():
            if "|" not in key:
                raise ValueError(f"malformed context key {key!r}")
            ids = sorted(entry)
            if not set(ids) <= valid_ids:
                raise ValueError(f"entry {key!r} references unknown token ids")
            logp = np.array([entry[t] for t in ids], dtype=np.float64)
            if abs(float(logsumexp(logp))) > 1e-6:
                raise ValueError(f"entry {key!r} is not normalized")
            self._table[key] = normalize_log(
                LogDistribution(support=tuple(ids), logp=logp)
            )

    @staticmethod
    def from_fixture(table_path: str | Path, vocab_path: str | Path) -> "TableBackend":
        return TableBackend(
            vocab=load_vocab_fixture(vocab_path),
            table=load_table_fixture(table_path),
        )

    def next_token_logprobs(self, ctx: ConditioningContext) -> LogDistribution:
        key = context_key(ctx.prefix, ctx.tag)
        hit = self._table.get(key)
        if hit is None:
            hit = self._table.get(DEFAULT_PREFIX + "|" + ctx.tag)
        if hit is None:
            raise UnknownContext(f"no table entry for {key!r} and no default")
        return hit
