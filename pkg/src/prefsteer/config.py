"""Run configuration: YAML loading, schema validation, backend construction.

A run is described by one YAML file validated against the published schema
below before anything else happens; unknown keys are rejected outright.
Command-line flags override file values, which override built-in defaults.
The remote backend's endpoint may come from the PREFSTEER_ENDPOINT
environment variable (overriding the file) and its bearer token only from
PREFSTEER_TOKEN, so credentials never live in config files.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from .backends import (
    NGramBackend,
    RemoteBackend,
    TableBackend,
    load_vocab_fixture,
)
from .decoder import VARIANTS, DecodeConfig
from .distributions import SamplingStrategy
from .errors import ConfigInvalid
from .harness import SyntheticScorer
from .online import FtrlConfig
from .prompts import render_base_prompt
from .rewards import PreferenceSpec

ENDPOINT_ENV = "PREFSTEER_ENDPOINT"
TOKEN_ENV = "PREFSTEER_TOKEN"

_SCORER_SCHEMA = {
    "type": "array",
    "items": {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "target"],
        "properties": {
            "kind": {
                "enum": ["token_frequency", "length_proximity", "marker_presence"]
            },
            "target": {"type": ["string", "integer"]},
        },
    },
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "additionalProperties": False,
    "required": ["backend", "preferences"],
    "properties": {
        "backend": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["table", "ngram", "remote"]},
                "table_path": {"type": "string"},
                "vocab_path": {"type": "string"},
                "base_corpus": {"type": "string"},
                "preference_corpora": {
                    "type": "object",
                    "additionalProperties": {"type": "string"},
                },
                "order": {"type": "integer", "minimum": 1},
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "gamma": {"type": "number", "minimum": 0, "maximum": 1},
                "endpoint": {"type": "string"},
                "top_k": {"type": "integer", "minimum": 2},
                "timeout": {"type": "number", "exclusiveMinimum": 0},
                "max_attempts": {"type": "integer", "minimum": 1},
            },
        },
        "decode": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tau": {"type": "number", "exclusiveMinimum": 0},
                "beta": {"type": "number", "exclusiveMinimum": 0},
                "max_tokens": {"type": "integer", "minimum": 1},
                "weight_update_stride": {"type": "integer", "minimum": 1},
                "floor_offset_nats": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
                "sampling": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["greedy", "temperature", "top_p"]},
                        "value": {"type": ["number", "null"]},
                    },
                },
                "ftrl": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "steps": {"type": "integer", "minimum": 0},
                        "alpha": {"type": "number", "minimum": 0},
                        "lam": {"type": "number", "minimum": 0},
                        "eta": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
            },
        },
        "preferences": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "description", "weight"],
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "description": {"type": "string", "minLength": 1},
                    "weight": {"type": "number", "minimum": 0},
                },
            },
        },
        "query": {"type": "string", "minLength": 1},
        "query_file": {"type": "string"},
        "variant": {"enum": list(VARIANTS)},
        "scorers": _SCORER_SCHEMA,
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "array",
                        "items": {"type": "number"},
                        "minItems": 2,
                        "maxItems": 2,
                    },
                }
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "trace": {"type": "string"},
                "text": {"type": "string"},
                "csv": {"type": "string"},
                "manifest": {"type": "string"},
            },
        },
    },
}

_BACKEND_KEYS = {
    "table": ("table_path", "vocab_path"),
    "ngram": ("base_corpus", "preference_corpora", "order", "delta", "gamma"),
    "remote": ("endpoint", "vocab_path", "top_k", "timeout", "max_attempts"),
}

_BACKEND_REQUIRED = {
    "table": ("table_path", "vocab_path"),
    "ngram": ("base_corpus", "preference_corpora"),
    "remote": ("vocab_path",),
}


@dataclass
class RunConfig:
    backend: dict
    decode: DecodeConfig
    preferences: list[PreferenceSpec]
    queries: list[str]
    variant: str
    scorers: list[SyntheticScorer]
    sweep_grid: list[tuple[float, float]] | None
    output: dict[str, str]
    base_dir: Path
    raw: dict = field(repr=False, default_factory=dict)


def _fail(msg: str) -> ConfigInvalid:
    return ConfigInvalid(msg)


def validate_raw(raw: dict) -> None:
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as err:
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise _fail(f"config invalid at {path}: {err.message}") from err
    kind = raw["backend"]["kind"]
    extra = set(raw["backend"]) - {"kind"} - set(_BACKEND_KEYS[kind])
    if extra:
        raise _fail(f"backend kind {kind!r} does not accept keys {sorted(extra)}")
    missing = [k for k in _BACKEND_REQUIRED[kind] if k not in raw["backend"]]
    if missing:
        raise _fail(f"backend kind {kind!r} requires keys {missing}")
    if kind == "remote" and "endpoint" not in raw["backend"] \
            and not os.environ.get(ENDPOINT_ENV):
        raise _fail(
            f"remote backend needs an endpoint (config key or {ENDPOINT_ENV})"
        )
    if ("query" in raw) == ("query_file" in raw):
        raise _fail("exactly one of 'query' and 'query_file' must be given")


def _parse_decode(section: dict) -> DecodeConfig:
    kwargs: dict = {}
    for key in ("tau", "beta", "max_tokens", "weight_update_stride",
                "floor_offset_nats", "seed"):
        if key in section:
            kwargs[key] = section[key]
    if "sampling" in section:
        s = section["sampling"]
        kwargs["sampling"] = SamplingStrategy(s["kind"], s.get("value"))
    if "ftrl" in section:
        kwargs["ftrl"] = FtrlConfig(**section["ftrl"])
    return DecodeConfig(**kwargs)


def parse_config(raw: dict, base_dir: str | Path = ".") -> RunConfig:
    validate_raw(raw)
    base_dir = Path(base_dir)
    prefs = [
        PreferenceSpec(p["id"], p["description"], p["weight"])
        for p in raw["preferences"]
    ]
    ids = [p.id for p in prefs]
    if len(set(ids)) != len(ids):
        raise _fail(f"preference ids must be unique, got {ids}")
    if "query" in raw:
        queries = [raw["query"]]
    else:
        qpath = base_dir / raw["query_file"]
        if not qpath.exists():
            raise _fail(f"query file not found: {qpath}")
        queries = [
            line.strip()
            for line in qpath.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        if not queries:
            raise _fail(f"query file {qpath} holds no queries")
    scorers = [
        SyntheticScorer(s["kind"], s["target"]) for s in raw.get("scorers", [])
    ]
    grid = None
    if "sweep" in raw and "grid" in raw["sweep"]:
        grid = [tuple(float(x) for x in pair) for pair in raw["sweep"]["grid"]]
    return RunConfig(
        backend=dict(raw["backend"]),
        decode=_parse_decode(raw.get("decode", {})),
        preferences=prefs,
        queries=queries,
        variant=raw.get("variant", "full"),
        scorers=scorers,
        sweep_grid=grid,
        output=dict(raw.get("output", {})),
        base_dir=base_dir,
        raw=copy.deepcopy(raw),
    )


def apply_overrides(raw: dict, overrides: dict) -> dict:
    """Overlay dotted-path CLI overrides onto the raw config tree."""
    out = copy.deepcopy(raw)
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = out
        parts = dotted.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        leaf = parts[-1]
        node[leaf] = value
        if dotted == "query":
            out.pop("query_file", None)
    return out


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise _fail(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as err:
        raise _fail(f"config is not valid YAML: {err}") from err
    if not isinstance(raw, dict):
        raise _fail("config root must be a mapping")
    if overrides:
        raw = apply_overrides(raw, overrides)
    return parse_config(raw, base_dir=path.parent)


def serialize_config(cfg: RunConfig) -> dict:
    """Rebuild the config tree from parsed state, preserving the key set."""
    out: dict = {"backend": dict(cfg.backend)}
    if "decode" in cfg.raw:
        decode: dict = {}
        echo = cfg.decode.echo()
        for key in cfg.raw["decode"]:
            if key == "sampling":
                decode["sampling"] = dict(echo["sampling"])
            elif key == "ftrl":
                decode["ftrl"] = {
                    k: echo["ftrl"][k] for k in cfg.raw["decode"]["ftrl"]
                }
            else:
                decode[key] = echo[key]
        out["decode"] = decode
    out["preferences"] = [
        {"id": p.id, "description": p.description, "weight": p.initial_weight}
        for p in cfg.preferences
    ]
    for key in ("query", "query_file", "variant"):
        if key in cfg.raw:
            out[key] = cfg.raw[key]
    if "scorers" in cfg.raw:
        out["scorers"] = [
            {"kind": s.kind, "target": s.target} for s in cfg.scorers
        ]
    if "sweep" in cfg.raw:
        out["sweep"] = {"grid": [list(pair) for pair in cfg.sweep_grid]}
    if "output" in cfg.raw:
        out["output"] = dict(cfg.output)
    return out


def fixture_paths(cfg: RunConfig) -> list[Path]:
    """Every on-disk input the run depends on, for manifest hashing."""
    b = cfg.backend
    paths = []
    if b["kind"] == "table":
        paths = [cfg.base_dir / b["table_path"], cfg.base_dir / b["vocab_path"]]
    elif b["kind"] == "ngram":
        paths = [cfg.base_dir / b["base_corpus"]]
        paths.extend(cfg.base_dir / p for p in b["preference_corpora"].values())
    elif b["kind"] == "remote":
        paths = [cfg.base_dir / b["vocab_path"]]
    if "query_file" in cfg.raw:
        paths.append(cfg.base_dir / cfg.raw["query_file"])
    return [Path(os.path.normpath(p)) for p in paths]


def build_backend(cfg: RunConfig):
    b = cfg.backend
    if b["kind"] == "table":
        return TableBackend.from_fixture(
            cfg.base_dir / b["table_path"], cfg.base_dir / b["vocab_path"]
        )
    if b["kind"] == "ngram":
        return NGramBackend.from_files(
            cfg.base_dir / b["base_corpus"],
            {pid: cfg.base_dir / p for pid, p in b["preference_corpora"].items()},
            order=b.get("order", 2),
            delta=b.get("delta", 1.0),
            gamma=b.get("gamma", 0.7),
        )
    if b["kind"] == "remote":
        # The endpoint env var beats the file; the token only ever comes
        # from the environment so credentials stay out of config files.
        endpoint = os.environ.get(ENDPOINT_ENV) or b.get("endpoint")
        if not endpoint:
            raise _fail(
                f"remote backend needs an endpoint (config key or {ENDPOINT_ENV})"
            )
        vocab = load_vocab_fixture(cfg.base_dir / b["vocab_path"])
        return RemoteBackend(
            endpoint,
            vocab,
            top_k=b.get("top_k", 50),
            timeout=b.get("timeout", 10.0),
            max_attempts=b.get("max_attempts", 3),
            auth_token=os.environ.get(TOKEN_ENV),
            seed=cfg.decode.seed,
            base_prompt_builder=render_base_prompt,
        )
    raise _fail(f"unknown backend kind {b['kind']!r}")
