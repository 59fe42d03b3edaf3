"""Desk-scale evaluation: metrics, Pareto sweeps, ablations, dynamics.

Scoring uses deterministic synthetic scorers over generated token sequences
instead of judge models, mapped onto the 1..5 scale so the match-rate
threshold keeps its meaning. Everything here consumes traces and scorers
only; no export path ever re-queries a backend.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .backends.ngram import NGramBackend
from .decoder import VARIANTS, DecodeConfig, GenerationTrace, decode_variant
from .distributions import Vocab
from .errors import EmptyInput, EmptyTrace
from .rewards import PreferenceSpec

DEFAULT_THRESHOLD = 3.0


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Rows are responses, columns are preferences, entries in [1, 5]."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64).copy()
        if arr.ndim != 2 or arr.size == 0:
            raise EmptyInput("score matrix must be 2-d and non-empty")
        if np.any(arr < 1.0) or np.any(arr > 5.0) or not np.all(np.isfinite(arr)):
            raise ValueError("scores must lie in [1, 5]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def compute_metrics(scores: ScoreMatrix, threshold: float = DEFAULT_THRESHOLD) -> dict:
    """All-preference match rate, average score, and mean worst-column score.

    Means run through math.fsum so every value is correctly rounded: any
    reimplementation that sums exactly reproduces these floats bit for bit.
    """
    s = scores.values
    n = s.shape[0]
    amr = math.fsum(1.0 for row in s if np.all(row >= threshold)) / n
    aps = math.fsum(float(x) for x in s.ravel()) / s.size
    worst = math.fsum(float(np.min(row)) for row in s) / n
    return {"amr": amr, "aps": aps, "worst": worst}


@dataclass(frozen=True)
class SyntheticScorer:
    """Deterministic stand-in for a per-preference judge.

    ``token_frequency`` rewards a high fraction of the target token among
    generated non-terminal tokens; ``length_proximity`` rewards output length
    near a target; ``marker_presence`` is 5 when the marker token appears at
    all, else 1. All kinds map their natural [0, 1] signal onto [1, 5].
    """

    kind: str
    target: str | int | None = None

    @staticmethod
    def token_frequency(surface: str) -> "SyntheticScorer":
        return SyntheticScorer("token_frequency", surface)

    @staticmethod
    def length_proximity(target_len: int) -> "SyntheticScorer":
        if target_len < 1:
            raise ValueError(f"target length must be >= 1, got {target_len}")
        return SyntheticScorer("length_proximity", target_len)

    @staticmethod
    def marker_presence(surface: str) -> "SyntheticScorer":
        return SyntheticScorer("marker_presence", surface)

    def score(self, query: str, tokens: Sequence[int], vocab: Vocab) -> float:
        content = [vocab.surface(t) for t in tokens if t != vocab.eos_id]
        if self.kind == "token_frequency":
            signal = content.count(self.target) / len(content) if content else 0.0
        elif self.kind == "length_proximity":
            signal = max(0.0, 1.0 - abs(len(content) - self.target) / self.target)
        elif self.kind == "marker_presence":
            signal = 1.0 if self.target in content else 0.0
        else:
            raise ValueError(f"unknown scorer kind {self.kind!r}")
        return 1.0 + 4.0 * signal


@dataclass(frozen=True)
class ParetoPoint:
    weights: tuple[float, float]
    scores: tuple[float, float]


DEFAULT_SWEEP_GRID = tuple(
    (round(1.0 - 0.2 * i, 1), round(0.2 * i, 1)) for i in range(6)
)


def pareto_sweep(
    queries: Sequence[str],
    prefs: Sequence[PreferenceSpec],
    grid: Sequence[tuple[float, float]],
    cfg: DecodeConfig,
    backend,
    scorers: Sequence[SyntheticScorer],
    variant: str = "full",
) -> list[ParetoPoint]:
    """One decode per (query, weight pair); scores averaged per pair."""
    if len(prefs) != 2 or len(scorers) != 2:
        raise ValueError("sweeps are defined for exactly two preferences")
    points = []
    for pair in grid:
        if len(pair) != 2 or min(pair) < 0 or abs(sum(pair) - 1.0) > 1e-9:
            raise ValueError(f"sweep pair {pair} is not on the 2-simplex")
        reweighted = [
            PreferenceSpec(p.id, p.description, w) for p, w in zip(prefs, pair)
        ]
        per_obj = np.zeros(2)
        for query in queries:
            try:
                tokens, _ = decode_variant(variant, query, reweighted, cfg, backend)
            except Exception as err:
                raise RuntimeError(
                    f"sweep cell failed at weights {pair} on query {query!r}: {err}"
                ) from err
            for j, scorer in enumerate(scorers):
                per_obj[j] += scorer.score(query, tokens, backend.vocab)
        per_obj /= len(queries)
        points.append(
            ParetoPoint(
                weights=(float(pair[0]), float(pair[1])),
                scores=(float(per_obj[0]), float(per_obj[1])),
            )
        )
    return points


def score_traces(
    traces: Sequence[GenerationTrace],
    scorers: Sequence[SyntheticScorer],
    vocab: Vocab,
) -> ScoreMatrix:
    rows = [
        [scorer.score(tr.query, tr.tokens, vocab) for scorer in scorers]
        for tr in traces
    ]
    return ScoreMatrix(np.array(rows))


def ablation_grid(
    queries: Sequence[str],
    prefs: Sequence[PreferenceSpec],
    cfg: DecodeConfig,
    backend,
    scorers: Sequence[SyntheticScorer],
) -> dict[str, dict]:
    """Metrics per variant over identical queries and seeds, in fixed order."""
    out: dict[str, dict] = {}
    for variant in VARIANTS:
        traces = [
            decode_variant(variant, q, prefs, cfg, backend)[1] for q in queries
        ]
        out[variant] = compute_metrics(score_traces(traces, scorers, backend.vocab))
    return out


def seeded_ablation(
    seeds: Sequence[int],
    cfg: DecodeConfig,
    scorers: Sequence[SyntheticScorer],
    case_factory: Callable[[int], tuple] | None = None,
) -> dict[str, dict]:
    """Per-variant metric means with 1.96*sd/sqrt(n) half-widths over seeds."""
    factory = case_factory if case_factory is not None else synthetic_case
    samples: dict[str, dict[str, list[float]]] = {
        v: {"amr": [], "aps": [], "worst": []} for v in VARIANTS
    }
    for seed in seeds:
        backend, prefs, query = factory(seed)
        grid = ablation_grid([query], prefs, cfg, backend, scorers)
        for variant, metrics in grid.items():
            for name, value in metrics.items():
                samples[variant][name].append(value)
    out: dict[str, dict] = {}
    for variant, metric_samples in samples.items():
        out[variant] = {}
        for name, values in metric_samples.items():
            arr = np.asarray(values)
            half = 1.96 * arr.std(ddof=1) / np.sqrt(len(arr)) if len(arr) > 1 else 0.0
            out[variant][name] = {"mean": float(arr.mean()), "halfwidth": float(half)}
    return out


def dynamics_rows(trace: GenerationTrace) -> list[tuple[int, str, float, float]]:
    if not trace.records:
        raise EmptyTrace("trace has no step records")
    rows = []
    for rec in trace.records:
        for pref_id, cum, w in zip(
            trace.preference_ids, rec.cumulative_rewards, rec.weights
        ):
            rows.append((rec.step, pref_id, cum, w))
    return rows


def dynamics_export(trace: GenerationTrace) -> str:
    """CSV with one row per (step, preference): cumulative reward and weight."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "pref_id", "cumulative_reward", "weight"])
    for step, pref_id, cum, w in dynamics_rows(trace):
        writer.writerow([step, pref_id, repr(cum), repr(w)])
    return buf.getvalue()


def pareto_export(points: Sequence[ParetoPoint], pref_ids: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [f"weight_{pref_ids[0]}", f"weight_{pref_ids[1]}",
         f"score_{pref_ids[0]}", f"score_{pref_ids[1]}"]
    )
    for pt in points:
        writer.writerow(
            [repr(pt.weights[0]), repr(pt.weights[1]),
             repr(pt.scores[0]), repr(pt.scores[1])]
        )
    return buf.getvalue()


def ablation_export(grid: Mapping[str, dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["variant", "amr", "aps", "worst"])
    for variant, metrics in grid.items():
        writer.writerow(
            [variant, repr(metrics["amr"]), repr(metrics["aps"]), repr(metrics["worst"])]
        )
    return buf.getvalue()


def reward_gap(trace: GenerationTrace) -> float:
    """Largest per-step spread between the two cumulative reward tracks."""
    if not trace.records:
        raise EmptyTrace("trace has no step records")
    if len(trace.preference_ids) != 2:
        raise ValueError("reward gap is defined for two preferences")
    return max(
        abs(rec.cumulative_rewards[0] - rec.cumulative_rewards[1])
        for rec in trace.records
    )


SYNTHETIC_VOCAB = Vocab.from_surfaces(["</s>", "a", "b", "c"], "</s>")


def synthetic_case(seed: int, n_docs: int = 40) -> tuple[NGramBackend, tuple, str]:
    """A seeded conflicting-preference world over a three-word language.

    The base corpus carries a seed-dependent skew toward one of the two
    contested tokens, so unbalanced decoding drifts; each preference corpus
    overwhelmingly favors its own token.
    """
    rng = np.random.default_rng(seed)
    words = np.array(["a", "b", "c"])

    def corpus(p: Sequence[float]) -> str:
        lines = []
        for _ in range(n_docs):
            length = int(rng.integers(6, 14))
            lines.append(" ".join(rng.choice(words, size=length, p=p)))
        return "\n".join(lines)

    # Skew is bounded away from balance so the unguided decode always has
    # a side to drift toward.
    offset = float(rng.uniform(0.1, 0.3))
    skew = 0.5 + offset if rng.integers(2) else 0.5 - offset
    base_text = corpus([0.8 * skew, 0.8 * (1.0 - skew), 0.2])
    a_text = corpus([0.8, 0.1, 0.1])
    b_text = corpus([0.1, 0.8, 0.1])
    backend = NGramBackend(
        base_text,
        {"likes_a": a_text, "likes_b": b_text},
        order=2,
        vocab=SYNTHETIC_VOCAB,
    )
    prefs = (
        PreferenceSpec("likes_a", "Use the token a as often as possible.", 0.5),
        PreferenceSpec("likes_b", "Use the token b as often as possible.", 0.5),
    )
    return backend, prefs, "c"


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run_manifest(
    config_echo: Mapping, seeds: Sequence[int], fixture_paths: Sequence[str | Path]
) -> dict:
    """Reproducibility record: config, seeds, and fixture content hashes."""
    return {
        "config": dict(config_echo),
        "seeds": list(seeds),
        "fixtures": {str(p): file_sha256(p) for p in sorted(map(str, fixture_paths))},
    }


def manifest_to_json(manifest: Mapping) -> str:
    return json.dumps(manifest, indent=2, sort_keys=False, ensure_ascii=False) + "\n"
