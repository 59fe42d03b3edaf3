"""The full steering decode loop.

Each step queries K+2 conditionals from the backend (unconditioned, the fixed
anchor, and one per preference), aligns them on a shared support, re-solves
the weight profile against the banked cumulative rewards, fuses, refines with
the online loop, and samples one token. The accepted token's rewards are
banked immediately, so the next step's weight solve sees the full prefix.

Ablation variants cut individual stages: ``no_weight_opt`` pins the weights
to the prior, ``no_online_opt`` emits the fused distribution directly, and
``neither`` does both, which reduces the engine to fusing conditionals under
the user's initial weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .backends.base import Conditioning, ConditioningContext, PolicyBackend
from .distributions import (
    LogDistribution,
    SamplingStrategy,
    align_supports,
    entropy,
    sample,
)
from .errors import AllZeroPrior, BackendError, ConfigInvalid
from .online import FtrlConfig, fuse, run_online_optimization
from .prompts import render_anchor_prompt, render_preference_prompt
from .rewards import PreferenceSpec, RewardState, accumulate, token_rewards
from .weights import WeightVector, optimize_weights

VARIANTS = ("full", "no_weight_opt", "no_online_opt", "neither")

# Spreads per-step sampling seeds so adjacent steps never share a stream.
SEED_STRIDE = 100003


@dataclass(frozen=True)
class DecodeConfig:
    tau: float = 1.0
    beta: float = 1.0
    ftrl: FtrlConfig = field(default_factory=FtrlConfig)
    sampling: SamplingStrategy = field(default_factory=SamplingStrategy.greedy)
    max_tokens: int = 32
    weight_update_stride: int = 1
    floor_offset_nats: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigInvalid(f"tau must be > 0, got {self.tau}")
        if self.beta <= 0:
            raise ConfigInvalid(f"beta must be > 0, got {self.beta}")
        if self.max_tokens < 1:
            raise ConfigInvalid(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.weight_update_stride < 1:
            raise ConfigInvalid(
                f"weight_update_stride must be >= 1, got {self.weight_update_stride}"
            )
        if self.floor_offset_nats <= 0:
            raise ConfigInvalid(
                f"floor_offset_nats must be > 0, got {self.floor_offset_nats}"
            )
        if self.sampling.kind not in ("greedy", "temperature", "top_p"):
            raise ConfigInvalid(
                f"unknown sampling strategy {self.sampling.kind!r}"
            )

    def echo(self) -> dict:
        """Stable dict form for trace summaries and manifests."""
        return {
            "tau": self.tau,
            "beta": self.beta,
            "ftrl": {
                "steps": self.ftrl.steps,
                "alpha": self.ftrl.alpha,
                "lam": self.ftrl.lam,
                "eta": self.ftrl.eta,
            },
            "sampling": {"kind": self.sampling.kind, "value": self.sampling.value},
            "max_tokens": self.max_tokens,
            "weight_update_stride": self.weight_update_stride,
            "floor_offset_nats": self.floor_offset_nats,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class StepRecord:
    """Everything observed while accepting one token."""

    step: int
    token_id: int
    token: str
    token_rewards: tuple[float, ...]
    cumulative_rewards: tuple[float, ...]
    weights: tuple[float, ...]
    entropy: float
    base_logp: float
    final_logp: float


@dataclass(frozen=True)
class GenerationTrace:
    query: str
    variant: str
    preference_ids: tuple[str, ...]
    prior: tuple[float, ...]
    prior_was_normalized: bool
    records: tuple[StepRecord, ...]
    tokens: tuple[int, ...]
    final_text: str
    stop_reason: str
    config: DecodeConfig


def step_seed(base_seed: int, step: int) -> int:
    return base_seed * SEED_STRIDE + step


def decode(
    query: str,
    prefs: Sequence[PreferenceSpec],
    cfg: DecodeConfig,
    backend: PolicyBackend,
) -> tuple[list[int], GenerationTrace]:
    return decode_variant("full", query, prefs, cfg, backend)


def decode_variant(
    variant: str,
    query: str,
    prefs: Sequence[PreferenceSpec],
    cfg: DecodeConfig,
    backend: PolicyBackend,
) -> tuple[list[int], GenerationTrace]:
    if variant not in VARIANTS:
        raise ConfigInvalid(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if not prefs:
        raise ConfigInvalid("decoding needs at least one preference")
    ids = [p.id for p in prefs]
    if len(set(ids)) != len(ids):
        raise ConfigInvalid(f"preference ids must be unique, got {ids}")

    raw = np.array([p.initial_weight for p in prefs], dtype=np.float64)
    if raw.sum() <= 0:
        raise AllZeroPrior("initial weights carry no mass")
    prior_was_normalized = bool(abs(raw.sum() - 1.0) > 1e-9)
    prior = WeightVector.normalized(raw)

    # The anchor conditioning is rendered once from the initial weights and
    # reused verbatim at every step; optimized weights never leak into it.
    anchor = Conditioning.for_anchor(
        render_anchor_prompt(prefs, prior.values, query),
        parts=tuple((p.id, prior[k]) for k, p in enumerate(prefs)),
    )
    pref_conditionings = [
        Conditioning.for_preference(p.id, render_preference_prompt(p, query))
        for p in prefs
    ]

    vocab = backend.vocab
    reward_state = RewardState.fresh(len(prefs))
    weights = prior
    records: list[StepRecord] = []
    tokens: list[int] = []
    stop_reason = "max_tokens"
    optimize = variant in ("full", "no_online_opt")
    refine = variant in ("full", "no_weight_opt")

    for step in range(cfg.max_tokens):
        prefix = tuple(tokens)
        ctxs = [ConditioningContext(query, prefix)]
        ctxs.append(ConditioningContext(query, prefix, anchor))
        ctxs.extend(ConditioningContext(query, prefix, c) for c in pref_conditionings)
        try:
            dists = backend.batch_logprobs(ctxs)
        except BackendError as err:
            err.partial_trace = _build_trace(
                query, variant, prefs, prior, prior_was_normalized, records,
                tokens, "backend_error", cfg, vocab,
            )
            raise
        aligned = align_supports(dists, floor_offset=cfg.floor_offset_nats)
        base_d, anchor_d, cond_ds = aligned[0], aligned[1], aligned[2:]

        if optimize and step % cfg.weight_update_stride == 0:
            weights = optimize_weights(prior, reward_state.cumulative, cfg.tau)

        fused = fuse(anchor_d, cond_ds, weights)
        pi_final = run_online_optimization(fused, base_d, cfg.ftrl) if refine else fused

        token = sample(pi_final, cfg.sampling, seed=step_seed(cfg.seed, step))
        step_r = token_rewards(base_d, cond_ds, token, cfg.beta)
        reward_state = accumulate(reward_state, step_r)
        records.append(
            StepRecord(
                step=step,
                token_id=token,
                token=vocab.surface(token),
                token_rewards=tuple(float(x) for x in step_r),
                cumulative_rewards=tuple(float(x) for x in reward_state.cumulative),
                weights=tuple(float(x) for x in weights.values),
                entropy=float(entropy(pi_final)),
                base_logp=float(base_d.logprob(token)),
                final_logp=float(pi_final.logprob(token)),
            )
        )
        tokens.append(token)
        if token == vocab.eos_id:
            stop_reason = "eos"
            break

    trace = _build_trace(
        query, variant, prefs, prior, prior_was_normalized, records, tokens,
        stop_reason, cfg, vocab,
    )
    return tokens, trace


def _build_trace(
    query, variant, prefs, prior, prior_was_normalized, records, tokens,
    stop_reason, cfg, vocab,
) -> GenerationTrace:
    return GenerationTrace(
        query=query,
        variant=variant,
        preference_ids=tuple(p.id for p in prefs),
        prior=tuple(float(x) for x in prior.values),
        prior_was_normalized=prior_was_normalized,
        records=tuple(records),
        tokens=tuple(tokens),
        final_text=vocab.detokenize(tokens),
        stop_reason=stop_reason,
        config=cfg,
    )


def trace_to_jsonl(trace: GenerationTrace) -> str:
    """One JSON object per step, then a summary line with the config echo.

    Field order is fixed and floats use repr serialization, so identical
    traces serialize byte-identically.
    """
    lines = []
    for r in trace.records:
        lines.append(
            json.dumps(
                {
                    "step": r.step,
                    "token_id": r.token_id,
                    "token": r.token,
                    "token_rewards": list(r.token_rewards),
                    "cumulative_rewards": list(r.cumulative_rewards),
                    "weights": list(r.weights),
                    "entropy": r.entropy,
                    "base_logp": r.base_logp,
                    "final_logp": r.final_logp,
                },
                ensure_ascii=False,
            )
        )
    lines.append(
        json.dumps(
            {
                "final_text": trace.final_text,
                "stop_reason": trace.stop_reason,
                "variant": trace.variant,
                "query": trace.query,
                "preference_ids": list(trace.preference_ids),
                "prior": list(trace.prior),
                "prior_was_normalized": trace.prior_was_normalized,
                "config": trace.config.echo(),
            },
            ensure_ascii=False,
        )
    )
    return "\n".join(lines) + "\n"


def write_trace_jsonl(trace: GenerationTrace, path: str | Path) -> None:
    Path(path).write_text(trace_to_jsonl(trace), encoding="utf-8")


def read_trace_jsonl(path: str | Path) -> tuple[list[dict], dict]:
    """Parse a trace file back into (step records, summary)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    rows = [json.loads(line) for line in lines if line.strip()]
    if not rows or "final_text" not in rows[-1]:
        raise ValueError(f"{path} is not a complete trace file")
    return rows[:-1], rows[-1]
