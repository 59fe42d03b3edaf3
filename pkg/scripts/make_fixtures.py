#!/usr/bin/env python3
"""Generate the committed test fixtures.

Everything here is deterministic: logits derive from SHA-256 of the fixture
name, prefix, tag, and token id, so regeneration is byte-stable on any
machine. Run from the repo root:

    python3 scripts/make_fixtures.py

Outputs land in fixtures/. The golden decode trace is produced separately by
scripts/reference_decode.py, which must be re-run whenever these change.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "fixtures"

CONFLICT_TAGS = ("base", "anchor", "favor_a", "favor_b")


def hash01(*parts) -> float:
    """Uniform [0, 1) from the SHA-256 of the joined parts."""
    key = ":".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def normalize(logits: list[float]) -> list[float]:
    m = max(logits)
    lse = m + math.log(sum(math.exp(x - m) for x in logits))
    return [x - lse for x in logits]


def all_prefixes(content_ids: list[int], max_len: int) -> list[tuple[int, ...]]:
    out = [()]
    frontier = [()]
    for _ in range(max_len):
        frontier = [p + (t,) for p in frontier for t in content_ids]
        out.extend(frontier)
    return out


def build_table(
    name: str,
    content_ids: list[int],
    eos_id: int,
    max_len: int,
    biases: dict[str, dict[int, float]],
    eos_logit: float,
) -> dict[str, dict[str, float]]:
    table = {}
    n_tokens = len(content_ids) + 1
    for prefix in all_prefixes(content_ids, max_len):
        prefix_key = ",".join(str(t) for t in prefix)
        for tag, bias in biases.items():
            logits = []
            for tid in range(n_tokens):
                noise = 2.0 * hash01(name, prefix_key, tag, tid) - 1.0
                base = eos_logit if tid == eos_id else 0.0
                logits.append(base + noise + bias.get(tid, 0.0))
            table[prefix_key + "|" + tag] = {
                str(tid): lp for tid, lp in enumerate(normalize(logits))
            }
    return table


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {path} ({path.stat().st_size} bytes)")


def make_conflict() -> None:
    # Vocab: a=0, b=1, c=2, eos=3. Two preferences pull toward a and b.
    vocab = {"tokens": [[0, "a"], [1, "b"], [2, "c"], [3, "</s>"]], "eos_id": 3}
    biases = {
        "base": {},
        "anchor": {0: 0.9, 1: 0.9},
        "favor_a": {0: 1.8, 1: -0.6},
        "favor_b": {1: 1.8, 0: -0.6},
    }
    table = build_table("conflict", [0, 1, 2], 3, 4, biases, eos_logit=-1.5)
    write_json(OUT / "conflict_vocab.json", vocab)
    write_json(OUT / "conflict_table.json", table)


def make_sweep() -> None:
    # Vocab: a=0, b=1, eos=2. Strong opposed biases for clean steerability.
    vocab = {"tokens": [[0, "a"], [1, "b"], [2, "</s>"]], "eos_id": 2}
    biases = {
        "base": {},
        "anchor": {0: 1.1, 1: 1.1},
        "favor_a": {0: 2.2, 1: -1.0},
        "favor_b": {1: 2.2, 0: -1.0},
    }
    table = build_table("sweep", [0, 1], 2, 6, biases, eos_logit=-2.0)
    write_json(OUT / "sweep_vocab.json", vocab)
    write_json(OUT / "sweep_table.json", table)


def make_corpora() -> None:
    """Small word corpora for the n-gram demo configs, one doc per line."""
    words = ["a", "b", "c"]

    def corpus(name: str, probs: list[float], docs: int = 30) -> str:
        lines = []
        for d in range(docs):
            length = 6 + int(hash01(name, d, "len") * 8)
            picked = []
            for i in range(length):
                u = hash01(name, d, i)
                acc = 0.0
                for w, p in zip(words, probs):
                    acc += p
                    if u < acc:
                        picked.append(w)
                        break
                else:
                    picked.append(words[-1])
            lines.append(" ".join(picked))
        return "\n".join(lines) + "\n"

    (OUT / "corpus_base.txt").write_text(
        corpus("base", [0.4, 0.4, 0.2]), encoding="utf-8"
    )
    (OUT / "corpus_likes_a.txt").write_text(
        corpus("likes_a", [0.8, 0.1, 0.1]), encoding="utf-8"
    )
    (OUT / "corpus_likes_b.txt").write_text(
        corpus("likes_b", [0.1, 0.8, 0.1]), encoding="utf-8"
    )
    print("wrote corpus_base.txt, corpus_likes_a.txt, corpus_likes_b.txt")


ANCHOR_GOLDEN = """You are an AI assistant to provide responses to user questions.

Your response should follow the multiple principles listed below. Each principle is tagged with a weight indicating its relative importance (higher weight = higher priority). When generating your response, attend to each principle proportionally to its weight and trade off between them accordingly.

1. (weight: 0.70) Keep the response short and direct.
2. (weight: 0.30) Use vivid, colorful language.

User query:
How do plants make food?
"""


def main() -> None:
    OUT.mkdir(exist_ok=True)
    make_conflict()
    make_sweep()
    make_corpora()
    # Written here as a hand-composed literal so the prompt renderer is
    # checked against a fixed expectation, not against itself.
    (OUT / "anchor_prompt_golden.txt").write_text(ANCHOR_GOLDEN, encoding="utf-8")
    print("wrote anchor_prompt_golden.txt")


if __name__ == "__main__":
    main()
