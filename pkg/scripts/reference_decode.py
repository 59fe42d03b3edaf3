#!/usr/bin/env python3
"""Independent step-by-step reference decode over the conflict fixture.

This script implements the whole per-step pipeline (log-ratio rewards,
closed-form weight rebalancing, anchored fusion, the regularized online
loop, greedy selection) directly from the formulas using only the standard
library. It shares no code with src/, so its output is an independent
oracle for the engine. Run after make_fixtures.py:

    python3 scripts/reference_decode.py

Writes fixtures/conflict_golden.json holding the token sequence and per-step
weights for the full pipeline and for the fuse-only variant, plus the first
step where the two disagree and the worst argmax margin (to prove the golden
sequence is not sitting on a tie).
"""

from __future__ import annotations

import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

TAU = 1.0
BETA = 1.0
T = 80
ALPHA = 0.5
LAM = 1.0
ETA = 10.0
STEPS = 5
PRIOR = [0.5, 0.5]
TAGS = ("base", "anchor", "favor_a", "favor_b")


def normalize(logp: list[float]) -> list[float]:
    m = max(logp)
    lse = m + math.log(sum(math.exp(x - m) for x in logp))
    return [x - lse for x in logp]


def load_table(path: Path) -> dict[str, list[float]]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    table = {}
    for key, row in raw.items():
        dense = [row[str(tid)] for tid in range(len(row))]
        table[key] = normalize(dense)
    return table


def lookup(table, prefix: list[int], tag: str) -> list[float]:
    key = ",".join(str(t) for t in prefix) + "|" + tag
    # Mirror the engine's support alignment, which renormalizes once more.
    return normalize(table[key])


def solve_weights(prior: list[float], cumulative: list[float]) -> list[float]:
    exps = [math.log(p) - r / TAU for p, r in zip(prior, cumulative)]
    m = max(exps)
    shifted = [math.exp(e - m) for e in exps]
    z = sum(shifted)
    return [s / z for s in shifted]


def fuse(anchor: list[float], conds: list[list[float]], w: list[float]) -> list[float]:
    out = list(anchor)
    for wk, cond in zip(w, conds):
        out = [o + wk * c for o, c in zip(out, cond)]
    return normalize(out)


def online_loop(fused: list[float], base: list[float]) -> list[float]:
    n = len(fused)
    util_sum = [0.0] * n
    current = fused
    for t in range(1, T + 1):
        coeff = (t - 1) * LAM * ETA
        raw = [
            (ETA * util_sum[i] + coeff * fused[i] + current[i]) / (coeff + 1.0)
            for i in range(n)
        ]
        pi = normalize(raw)
        util_sum = [u + ALPHA * (pi[i] - base[i]) for i, u in enumerate(util_sum)]
        current = pi
    return current


def argmax_with_margin(logp: list[float]) -> tuple[int, float]:
    best = max(logp)
    token = min(i for i, x in enumerate(logp) if x == best)
    others = [x for i, x in enumerate(logp) if i != token]
    return token, best - max(others)


def run(table, rebalance: bool, refine: bool):
    cumulative = [0.0, 0.0]
    tokens: list[int] = []
    weights_log: list[list[float]] = []
    cum_log: list[list[float]] = []
    min_margin = math.inf
    for _ in range(STEPS):
        base = lookup(table, tokens, "base")
        anchor = lookup(table, tokens, "anchor")
        conds = [lookup(table, tokens, "favor_a"), lookup(table, tokens, "favor_b")]
        w = solve_weights(PRIOR, cumulative) if rebalance else list(PRIOR)
        pi = fuse(anchor, conds, w)
        if refine:
            pi = online_loop(pi, base)
        token, margin = argmax_with_margin(pi)
        min_margin = min(min_margin, margin)
        rewards = [BETA * (c[token] - base[token]) for c in conds]
        cumulative = [r + d for r, d in zip(cumulative, rewards)]
        tokens.append(token)
        weights_log.append(w)
        cum_log.append(list(cumulative))
    return {
        "tokens": tokens,
        "weights": weights_log,
        "cumulative": cum_log,
        "min_argmax_margin": min_margin,
    }


def main() -> None:
    table = load_table(FIXTURES / "conflict_table.json")
    full = run(table, rebalance=True, refine=True)
    neither = run(table, rebalance=False, refine=False)
    divergence = next(
        (i for i, (a, b) in enumerate(zip(full["tokens"], neither["tokens"])) if a != b),
        None,
    )
    golden = {
        "query": "How do plants make food?",
        "preferences": [["favor_a", 0.5], ["favor_b", 0.5]],
        "config": {
            "tau": TAU,
            "beta": BETA,
            "steps": STEPS,
            "ftrl": {"steps": T, "alpha": ALPHA, "lam": LAM, "eta": ETA},
        },
        "full": full,
        "neither": neither,
        "first_divergence_step": divergence,
    }
    out = FIXTURES / "conflict_golden.json"
    out.write_text(json.dumps(golden, indent=1) + "\n", encoding="utf-8")
    print(f"full tokens:    {full['tokens']} (margin {full['min_argmax_margin']:.4g})")
    print(f"neither tokens: {neither['tokens']} (margin {neither['min_argmax_margin']:.4g})")
    print(f"first divergence step: {divergence}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
