"""Prompt templates for preference conditioning.

Three templates are rendered locally: a single-preference prompt (used to
probe each objective during reward discovery), a fixed anchor prompt that
lists every principle with its initial weight, and a bare base prompt with no
preference block. A rubric-based judge template is shipped for external
scoring pipelines; nothing in this package ever calls a judge.

Rendering is plain text substitution, byte-stable for stable inputs. Anchor
weights are printed with two fractional digits (Python ``%.2f`` rounding).
"""

from __future__ import annotations

from typing import Sequence

from .errors import LengthMismatch, MissingPlaceholder

PREFERENCE_TEMPLATE = """You are an AI assistant to provide responses to user questions.

Your responses should follow the following preferences:

[OBJECTIVE DESCRIPTION]

User query:
[QUERY]
"""

ANCHOR_TEMPLATE = """You are an AI assistant to provide responses to user questions.

Your response should follow the multiple principles listed below. Each principle is tagged with a weight indicating its relative importance (higher weight = higher priority). When generating your response, attend to each principle proportionally to its weight and trade off between them accordingly.

[PRINCIPLES]

User query:
[QUERY]
"""

BASE_TEMPLATE = """You are an AI assistant to provide responses to user questions.

User query:
[QUERY]
"""

JUDGE_TEMPLATE = """You are an expert evaluator. You will be given a user's instruction and an AI assistant's response. You will also be given a specific evaluation criterion with detailed score descriptions.

Please evaluate the response based ONLY on the given criterion.

## User Instruction
[QUERY]

## AI Assistant's Response
[RESPONSE]

## Target Preference
[PREFERENCE]

## Score Descriptions
- Score 1: [RUBRIC 1]
- Score 2: [RUBRIC 2]
- Score 3: [RUBRIC 3]
- Score 4: [RUBRIC 4]
- Score 5: [RUBRIC 5]

Based on the criterion above, assign a score from 1 to 5. Provide a brief justification, then state your final score.

Output your final score in the format: [[score]]
"""


def _require(value: str, slot: str) -> str:
    if not value or not value.strip():
        raise MissingPlaceholder(f"cannot render prompt: {slot} is empty")
    return value


def _description(pref) -> str:
    # Accept PreferenceSpec-like objects or bare strings.
    return getattr(pref, "description", pref)


def render_preference_prompt(pref, query: str) -> str:
    """Fill the single-preference template with one objective description."""
    desc = _require(_description(pref), "objective description")
    return PREFERENCE_TEMPLATE.replace("[OBJECTIVE DESCRIPTION]", desc).replace(
        "[QUERY]", _require(query, "query")
    )


def render_anchor_prompt(prefs: Sequence, weights: Sequence[float], query: str) -> str:
    """Fill the anchor template with a numbered, weight-annotated principle list.

    The anchor is built once per generation from the user's initial weights
    and reused verbatim at every decode step; per-step optimized weights are
    never substituted in.
    """
    if len(prefs) != len(weights):
        raise LengthMismatch(
            f"{len(prefs)} preferences but {len(weights)} weights"
        )
    if not prefs:
        raise LengthMismatch("anchor prompt needs at least one preference")
    lines = []
    for i, (pref, w) in enumerate(zip(prefs, weights), start=1):
        desc = _require(_description(pref), f"description of preference {i}")
        lines.append(f"{i}. (weight: {float(w):.2f}) {desc}")
    return ANCHOR_TEMPLATE.replace("[PRINCIPLES]", "\n".join(lines)).replace(
        "[QUERY]", _require(query, "query")
    )


def render_base_prompt(query: str) -> str:
    """The same system framing with no preference block at all."""
    return BASE_TEMPLATE.replace("[QUERY]", _require(query, "query"))


def render_judge_prompt(
    query: str, response: str, preference: str, rubric: Sequence[str]
) -> str:
    """Fill the judge template. Provided for external pipelines only."""
    if len(rubric) != 5:
        raise LengthMismatch(f"judge rubric needs 5 score descriptions, got {len(rubric)}")
    text = (
        JUDGE_TEMPLATE.replace("[QUERY]", _require(query, "query"))
        .replace("[RESPONSE]", _require(response, "response"))
        .replace("[PREFERENCE]", _require(preference, "preference"))
    )
    for i, desc in enumerate(rubric, start=1):
        text = text.replace(f"[RUBRIC {i}]", _require(desc, f"rubric {i}"))
    return text
