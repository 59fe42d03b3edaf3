#!/usr/bin/env python3
"""Run the full desk-scale experiment suite and write plot-ready CSVs.

Produces, under results/:
  pareto.csv        two-objective sweep on the steerability table fixture
  ablation.csv      variant comparison on one synthetic n-gram case
  ablation_seeds.csv  per-variant metric means with half-widths over seeds
  dynamics_full.csv / dynamics_fixed.csv  cumulative-reward and weight
        trajectories with and without rebalancing on one synthetic case
  manifest.json     config echo, seeds, fixture digests

Everything is seeded and backend calls are local, so reruns reproduce every
byte. Runtime is a couple of minutes on a laptop.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from prefsteer.decoder import DecodeConfig, decode_variant
from prefsteer.harness import (
    DEFAULT_SWEEP_GRID,
    SyntheticScorer,
    ablation_export,
    ablation_grid,
    dynamics_export,
    file_sha256,
    manifest_to_json,
    pareto_export,
    pareto_sweep,
    reward_gap,
    run_manifest,
    seeded_ablation,
    synthetic_case,
)
from prefsteer.rewards import PreferenceSpec
from prefsteer.backends import TableBackend


def sweep_experiment(fixtures: Path, out: Path) -> None:
    backend = TableBackend.from_fixture(
        fixtures / "sweep_table.json", fixtures / "sweep_vocab.json"
    )
    prefs = (
        PreferenceSpec("favor_a", "Prefer the first token stream.", 0.5),
        PreferenceSpec("favor_b", "Prefer the second token stream.", 0.5),
    )
    scorers = (
        SyntheticScorer.token_frequency("a"),
        SyntheticScorer.token_frequency("b"),
    )
    cfg = DecodeConfig(max_tokens=6)
    points = pareto_sweep(
        ["How do plants make food?"], prefs, DEFAULT_SWEEP_GRID, cfg, backend, scorers
    )
    (out / "pareto.csv").write_text(
        pareto_export(points, [p.id for p in prefs]), encoding="utf-8"
    )
    print("pareto.csv:")
    for p in points:
        print(f"  weights {p.weights} -> scores {p.scores}")


def ablation_experiment(out: Path, n_seeds: int) -> None:
    scorers = (
        SyntheticScorer.token_frequency("a"),
        SyntheticScorer.token_frequency("b"),
    )
    cfg = DecodeConfig(max_tokens=16)

    backend, prefs, query = synthetic_case(0)
    grid = ablation_grid([query], prefs, cfg, backend, scorers)
    (out / "ablation.csv").write_text(ablation_export(grid), encoding="utf-8")

    report = seeded_ablation(range(n_seeds), cfg, scorers)
    lines = ["variant,metric,mean,halfwidth"]
    for variant, metrics in report.items():
        for metric, cell in metrics.items():
            lines.append(
                f"{variant},{metric},{cell['mean']!r},{cell['halfwidth']!r}"
            )
    (out / "ablation_seeds.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"ablation_seeds.csv ({n_seeds} seeds):")
    for variant, metrics in report.items():
        cells = ", ".join(
            f"{m}={c['mean']:.3f}±{c['halfwidth']:.3f}" for m, c in metrics.items()
        )
        print(f"  {variant}: {cells}")


def dynamics_experiment(out: Path) -> None:
    backend, prefs, query = synthetic_case(7)
    cfg = DecodeConfig(max_tokens=16)
    _, full = decode_variant("full", query, prefs, cfg, backend)
    _, fixed = decode_variant("no_weight_opt", query, prefs, cfg, backend)
    (out / "dynamics_full.csv").write_text(dynamics_export(full), encoding="utf-8")
    (out / "dynamics_fixed.csv").write_text(dynamics_export(fixed), encoding="utf-8")
    print(
        f"dynamics: max reward gap {reward_gap(full):.3f} with rebalancing, "
        f"{reward_gap(fixed):.3f} without"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--fixtures", default=str(REPO / "fixtures"))
    parser.add_argument("--out", default=str(REPO / "results"))
    parser.add_argument("--seeds", type=int, default=50)
    args = parser.parse_args()

    fixtures = Path(args.fixtures)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sweep_experiment(fixtures, out)
    ablation_experiment(out, args.seeds)
    dynamics_experiment(out)

    cfg = DecodeConfig(max_tokens=16)
    manifest = run_manifest(
        cfg.echo(),
        seeds=list(range(args.seeds)),
        fixture_paths=[fixtures / "sweep_table.json", fixtures / "sweep_vocab.json"],
    )
    (out / "manifest.json").write_text(manifest_to_json(manifest), encoding="utf-8")
    print(f"wrote {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
