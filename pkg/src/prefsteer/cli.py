"""Command-line entry point.

Subcommands: decode, sweep, ablate, dynamics, selftest. Every run that
writes artifacts can also emit a JSON manifest tying together the resolved
config, the seeds used, and sha256 digests of all input fixtures, so any
output file can be traced back to its exact inputs. Failures print a
machine-readable JSON object on stderr and exit with a stable code:
0 success, 2 config error, 3 backend error, 4 oracle-suite failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import selftest as selftest_mod
from .config import RunConfig, build_backend, fixture_paths, load_config
from .decoder import decode_variant, trace_to_jsonl
from .errors import BackendError, ConfigInvalid, PrefsteerError
from .harness import (
    DEFAULT_SWEEP_GRID,
    ablation_export,
    ablation_grid,
    dynamics_export,
    pareto_export,
    pareto_sweep,
    run_manifest,
    manifest_to_json,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BACKEND = 3
EXIT_SELFTEST = 4


def _error_json(code: str, message: str) -> str:
    return json.dumps({"error": {"code": code, "message": message}}, sort_keys=True)


def _write_text(path: Path, content: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(content, encoding="utf-8")


def _out_path(cfg: RunConfig, key: str, flag_value: str | None) -> Path | None:
    if flag_value:
        return Path(flag_value)
    if key in cfg.output:
        return cfg.base_dir / cfg.output[key]
    return None


def _maybe_manifest(cfg: RunConfig, args) -> None:
    path = _out_path(cfg, "manifest", getattr(args, "manifest", None))
    if path is None:
        return
    manifest = run_manifest(
        cfg.decode.echo(),
        seeds=[cfg.decode.seed],
        fixture_paths=fixture_paths(cfg),
    )
    _write_text(path, manifest_to_json(manifest))


def _overrides(args) -> dict:
    out = {
        "query": getattr(args, "query", None),
        "variant": getattr(args, "variant", None),
        "decode.seed": getattr(args, "seed", None),
        "decode.max_tokens": getattr(args, "max_tokens", None),
    }
    return {k: v for k, v in out.items() if v is not None}


def _load(args) -> RunConfig:
    return load_config(args.config, overrides=_overrides(args))


def cmd_decode(args) -> int:
    cfg = _load(args)
    backend = build_backend(cfg)
    variant = cfg.variant
    texts = []
    trace_lines = []
    for query in cfg.queries:
        _, trace = decode_variant(variant, query, cfg.preferences, cfg.decode, backend)
        texts.append(trace.final_text)
        trace_lines.append(trace_to_jsonl(trace))
    trace_path = _out_path(cfg, "trace", args.trace)
    if trace_path is not None:
        _write_text(trace_path, "".join(trace_lines))
    text_out = "\n".join(texts) + "\n"
    text_path = _out_path(cfg, "text", args.text)
    if text_path is not None:
        _write_text(text_path, text_out)
    sys.stdout.write(text_out)
    _maybe_manifest(cfg, args)
    return EXIT_OK


def _resolve_scorers(cfg: RunConfig, expected: int | None = None):
    if not cfg.scorers:
        raise ConfigInvalid("this command needs a 'scorers' section")
    if expected is not None and len(cfg.scorers) != expected:
        raise ConfigInvalid(
            f"need exactly {expected} scorers, got {len(cfg.scorers)}"
        )
    return cfg.scorers


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if len(cfg.preferences) != 2:
        raise ConfigInvalid("sweep works on exactly two preferences")
    scorers = _resolve_scorers(cfg, expected=2)
    backend = build_backend(cfg)
    grid = cfg.sweep_grid if cfg.sweep_grid is not None else DEFAULT_SWEEP_GRID
    points = pareto_sweep(
        cfg.queries,
        cfg.preferences,
        grid,
        cfg.decode,
        backend,
        scorers,
        variant=cfg.variant,
    )
    csv_text = pareto_export(points, [p.id for p in cfg.preferences])
    path = _out_path(cfg, "csv", args.csv)
    if path is not None:
        _write_text(path, csv_text)
    else:
        sys.stdout.write(csv_text)
    _maybe_manifest(cfg, args)
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load(args)
    scorers = _resolve_scorers(cfg, expected=len(cfg.preferences))
    backend = build_backend(cfg)
    table = ablation_grid(cfg.queries, cfg.preferences, cfg.decode, backend, scorers)
    csv_text = ablation_export(table)
    path = _out_path(cfg, "csv", args.csv)
    if path is not None:
        _write_text(path, csv_text)
    else:
        sys.stdout.write(csv_text)
    _maybe_manifest(cfg, args)
    return EXIT_OK


def cmd_dynamics(args) -> int:
    cfg = _load(args)
    backend = build_backend(cfg)
    # Dynamics plots track one generation; use the first query.
    _, trace = decode_variant(
        cfg.variant, cfg.queries[0], cfg.preferences, cfg.decode, backend
    )
    csv_text = dynamics_export(trace)
    path = _out_path(cfg, "csv", args.csv)
    if path is not None:
        _write_text(path, csv_text)
    else:
        sys.stdout.write(csv_text)
    _maybe_manifest(cfg, args)
    return EXIT_OK


def cmd_selftest(args) -> int:
    passed, failed = selftest_mod.run_suites(
        fixtures_dir=Path(args.fixtures), stream=sys.stdout
    )
    print(f"selftest: {passed} passed, {failed} failed")
    return EXIT_OK if failed == 0 else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prefsteer",
        description="Multi-objective preference steering for next-token decoders.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_variant=True):
        p.add_argument("--config", required=True, help="YAML run config")
        p.add_argument("--query", help="override the config query")
        p.add_argument("--seed", type=int, help="override decode.seed")
        p.add_argument("--max-tokens", type=int, dest="max_tokens",
                       help="override decode.max_tokens")
        p.add_argument("--manifest", help="write a run manifest JSON here")
        if with_variant:
            p.add_argument("--variant", choices=["full", "no_weight_opt",
                                                 "no_online_opt", "neither"],
                           help="override the pipeline variant")

    p = sub.add_parser("decode", help="generate text and a step trace")
    add_common(p)
    p.add_argument("--trace", help="write the JSONL trace here")
    p.add_argument("--text", help="write the final text here")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("sweep", help="two-objective Pareto sweep")
    add_common(p, with_variant=True)
    p.add_argument("--csv", help="write the Pareto CSV here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ablate", help="compare pipeline variants")
    add_common(p, with_variant=False)
    p.add_argument("--csv", help="write the metrics CSV here")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("dynamics", help="per-step reward/weight trajectory CSV")
    add_common(p)
    p.add_argument("--csv", help="write the dynamics CSV here")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("selftest", help="run the built-in oracle suites")
    p.add_argument("--fixtures", default="fixtures",
                   help="directory holding the shipped fixtures")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as err:
        print(_error_json("config", str(err)), file=sys.stderr)
        return EXIT_CONFIG
    except BackendError as err:
        print(_error_json("backend", str(err)), file=sys.stderr)
        return EXIT_BACKEND
    except PrefsteerError as err:
        print(_error_json("config", str(err)), file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as err:
        # Harness cells wrap decode failures; keep the backend exit code.
        if isinstance(err.__cause__, BackendError):
            print(_error_json("backend", str(err)), file=sys.stderr)
            return EXIT_BACKEND
        raise
    except OSError as err:
        print(_error_json("io", str(err)), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
