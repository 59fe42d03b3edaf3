"""Built-in oracle suites: independent recomputation of every numeric claim.

Each suite checks one library result against an implementation that shares
no code with the production path: high-accuracy summation (math.fsum),
hand-counted probabilities, whole-sequence probability products, lattice
or quasi-Newton optimizers, byte-level golden files, and rerun comparisons.
`run_suites` executes all of them and reports pass/fail counts; the CLI
maps any failure to exit code 4.

Several helpers (random-walk tables, the loop-based metric recomputation)
are exported for reuse by the acceptance test suite.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from .backends import (
    Conditioning,
    ConditioningContext,
    NGramBackend,
    TableBackend,
)
from .decoder import DecodeConfig, decode_variant
from .distributions import (
    LogDistribution,
    SamplingStrategy,
    Vocab,
    align_supports,
    entropy,
    kl_divergence,
    normalize_log,
    sample,
)
from .harness import (
    DEFAULT_SWEEP_GRID,
    ScoreMatrix,
    SyntheticScorer,
    compute_metrics,
    dynamics_export,
    pareto_export,
    pareto_sweep,
    reward_gap,
    seeded_ablation,
    synthetic_case,
)
from .online import (
    FtrlConfig,
    ftrl_objective,
    ftrl_step,
    fuse,
    initial_state,
    oracle_ftrl_step,
    utility,
)
from .prompts import render_anchor_prompt
from .rewards import PreferenceSpec, RewardState, accumulate, token_rewards
from .weights import WeightVector, optimize_weights, oracle_optimize_weights


# --- shared oracle helpers (also used by the acceptance tests) ---

def metrics_by_loops(values: np.ndarray, threshold: float = 3.0) -> dict:
    """Loop-based metric recomputation sharing no code with compute_metrics.

    Sums use math.fsum, so results are correctly rounded and must agree
    bit for bit with any other exact implementation of the same formulas.
    """
    rows = [list(map(float, row)) for row in values]
    n = len(rows)
    matched = []
    grand = []
    worsts = []
    for row in rows:
        matched.append(1.0 if all(s >= threshold for s in row) else 0.0)
        grand.extend(row)
        worsts.append(min(row))
    return {
        "amr": math.fsum(matched) / n,
        "aps": math.fsum(grand) / len(grand),
        "worst": math.fsum(worsts) / n,
    }


def random_walk_table(
    rng: np.random.Generator,
    length: int,
    n_content: int = 3,
    pref_tags: Sequence[str] = ("k0", "k1"),
) -> tuple[TableBackend, list[int]]:
    """A table backend populated only along one random token walk.

    Entries exist for every (prefix-of-walk, tag) pair, so sequence
    probabilities along the walk are exactly computable by a product.
    """
    surfaces = ["</s>"] + [f"t{i}" for i in range(n_content)]
    vocab = Vocab.from_surfaces(surfaces, "</s>")
    content_ids = [vocab.id_of(s) for s in surfaces[1:]]
    table: dict[str, dict[int, float]] = {}
    walk: list[int] = []
    for _ in range(length):
        prefix_key = ",".join(str(t) for t in walk)
        for tag in ("base", *pref_tags):
            logits = rng.normal(size=len(vocab))
            logits -= logits.max()
            logp = logits - math.log(math.fsum(math.exp(x) for x in logits))
            table[prefix_key + "|" + tag] = {
                tid: float(lp) for tid, lp in zip(vocab.ids, logp)
            }
        walk.append(int(rng.choice(content_ids)))
    return TableBackend(vocab, table), walk


def product_ratio_reward(
    backend: TableBackend, walk: Sequence[int], tag: str, beta: float
) -> float:
    """Whole-sequence reward via linear-space probability products."""
    base_prod = 1.0
    cond_prod = 1.0
    cond = Conditioning.for_preference(tag, tag)
    for i, tok in enumerate(walk):
        prefix = tuple(walk[:i])
        base = backend.next_token_logprobs(ConditioningContext("", prefix))
        conded = backend.next_token_logprobs(ConditioningContext("", prefix, cond))
        base_prod *= base.prob(tok)
        cond_prod *= conded.prob(tok)
    return beta * math.log(cond_prod / base_prod)


def golden_case(fixtures: Path):
    """Backend, preferences, and decode config for the golden-trace fixture."""
    golden = json.loads((fixtures / "conflict_golden.json").read_text())
    backend = TableBackend.from_fixture(
        fixtures / "conflict_table.json", fixtures / "conflict_vocab.json"
    )
    prefs = tuple(
        PreferenceSpec(pid, f"Prefer token stream {pid}.", w)
        for pid, w in golden["preferences"]
    )
    c = golden["config"]
    cfg = DecodeConfig(
        tau=c["tau"],
        beta=c["beta"],
        max_tokens=c["steps"],
        ftrl=FtrlConfig(**c["ftrl"]),
    )
    return golden, backend, prefs, cfg


def sweep_case(fixtures: Path):
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
    return backend, prefs, scorers, cfg


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise AssertionError(message)


def _rand_dist(rng: np.random.Generator, support: tuple[int, ...]) -> LogDistribution:
    p = rng.dirichlet(np.ones(len(support)) * 2.0)
    return LogDistribution(support, np.log(p))


# --- distribution algebra ---

def suite_normalization_summation(fixtures: Path) -> None:
    logp = [1.0, 2.0, 3.0]
    out = normalize_log(LogDistribution((0, 1, 2), logp))
    m = max(logp)
    lse = m + math.log(math.fsum(math.exp(x - m) for x in logp))
    for got, x in zip(out.logp, logp):
        _check(abs(got - (x - lse)) < 1e-14, f"normalize off at {x}: {got}")
    mass = math.fsum(math.exp(x) for x in out.logp)
    _check(abs(mass - 1.0) < 1e-12, f"exp-sum {mass} != 1")


def suite_kl_hand_value(fixtures: Path) -> None:
    p = LogDistribution((0, 1), np.log([0.5, 0.5]))
    q = LogDistribution((0, 1), np.log([0.9, 0.1]))
    expected = 0.5 * math.log(0.5 / 0.9) + 0.5 * math.log(0.5 / 0.1)
    got = kl_divergence(p, q)
    _check(abs(got - expected) < 1e-14, f"KL {got} != {expected}")
    _check(abs(got - 0.5108256237659907) < 1e-12, "KL far from frozen 0.5108")


def suite_alignment_mass(fixtures: Path) -> None:
    rng = np.random.default_rng(7)
    for trial in range(20):
        dists = []
        for _ in range(3):
            ids = sorted(rng.choice(12, size=int(rng.integers(2, 7)), replace=False))
            # Truncated slice of a wider distribution: mass < 1 on purpose.
            p = rng.dirichlet(np.ones(len(ids))) * rng.uniform(0.3, 0.9)
            dists.append(LogDistribution(tuple(int(i) for i in ids), np.log(p)))
        aligned = align_supports(dists)
        for d in aligned:
            mass = math.fsum(math.exp(x) for x in d.logp)
            _check(abs(mass - 1.0) < 1e-9, f"trial {trial}: mass {mass}")


def suite_nucleus_enumeration(fixtures: Path) -> None:
    d = LogDistribution((0, 1, 2), np.log([0.7, 0.2, 0.1]))
    # Independent nucleus enumeration: sort by prob desc, keep while the
    # cumulative sum stays <= p, always keeping the top token.
    order = sorted(range(3), key=lambda i: (-math.exp(d.logp[i]), d.support[i]))
    nucleus = []
    cum = 0.0
    for i in order:
        if nucleus and cum + math.exp(d.logp[i]) > 0.75:
            break
        nucleus.append(d.support[i])
        cum += math.exp(d.logp[i])
    _check(nucleus == [0], f"expected nucleus [0], got {nucleus}")
    for seed in range(25):
        got = sample(d, SamplingStrategy.top_p(0.75), seed=seed)
        _check(got == 0, f"top_p(0.75) drew {got} at seed {seed}")


# --- backends ---

def suite_ngram_hand_count(fixtures: Path) -> None:
    backend = NGramBackend("a a b", {}, order=1, delta=1.0)
    d = backend.next_token_logprobs(ConditioningContext("", ()))
    by_surface = {
        backend.vocab.surface(tid): math.exp(lp)
        for tid, lp in zip(d.support, d.logp)
    }
    # counts a=2, b=1, eos=0, plus delta=1 each, over total 3 + 3.
    expected = {"a": 3 / 6, "b": 2 / 6, "</s>": 1 / 6}
    for surface, want in expected.items():
        got = by_surface[surface]
        _check(abs(got - want) < 1e-14, f"p({surface}) {got} != {want}")


def suite_batch_vs_sequential(fixtures: Path) -> None:
    backend, prefs, query = synthetic_case(3)
    rng = np.random.default_rng(11)
    content = [backend.vocab.id_of(s) for s in ("a", "b", "c")]
    ctxs = []
    for _ in range(12):
        prefix = tuple(int(rng.choice(content)) for _ in range(int(rng.integers(0, 5))))
        cond = None
        if rng.random() < 0.6:
            cond = Conditioning.for_preference(
                prefs[int(rng.integers(0, 2))].id, "x"
            )
        ctxs.append(ConditioningContext(query, prefix, cond))
    batched = backend.batch_logprobs(ctxs)
    for i, ctx in enumerate(ctxs):
        solo = backend.next_token_logprobs(ctx)
        _check(batched[i].support == solo.support, f"ctx {i}: support differs")
        _check(
            np.array_equal(batched[i].logp, solo.logp),
            f"ctx {i}: batch and sequential logp differ",
        )


# --- reward discovery ---

def suite_token_reward_log_ratio(fixtures: Path) -> None:
    base = LogDistribution((0, 1, 2), np.log([0.25, 0.5, 0.25]))
    cond = LogDistribution((0, 1, 2), np.log([0.5, 0.25, 0.25]))
    r = token_rewards(base, [cond], chosen=0, beta=1.0)
    expected = math.log(0.5) - math.log(0.25)
    _check(abs(r[0] - expected) < 1e-15, f"reward {r[0]} != ln 2")
    _check(abs(r[0] - 0.6931471805599453) < 1e-12, "reward far from frozen ln 2")


def suite_cumulative_recompute(fixtures: Path) -> None:
    rng = np.random.default_rng(5)
    steps = rng.normal(size=(100, 3))
    state = RewardState.fresh(3)
    for i in range(100):
        state = accumulate(state, steps[i])
        for k in range(3):
            want = math.fsum(float(x) for x in steps[: i + 1, k])
            _check(
                abs(state.cumulative[k] - want) < 1e-12,
                f"step {i} pref {k}: {state.cumulative[k]} != {want}",
            )
    _check(state.step_count == 100, "step_count not advanced")


def suite_telescoping_product(fixtures: Path) -> None:
    rng = np.random.default_rng(17)
    for trial in range(10):
        length = int(rng.integers(5, 21))
        beta = float(rng.choice([0.5, 1.0, 2.0]))
        backend, walk = random_walk_table(rng, length)
        for tag in ("k0", "k1"):
            cond = Conditioning.for_preference(tag, tag)
            total = 0.0
            for i, tok in enumerate(walk):
                prefix = tuple(walk[:i])
                base = backend.next_token_logprobs(ConditioningContext("", prefix))
                conded = backend.next_token_logprobs(
                    ConditioningContext("", prefix, cond)
                )
                total += float(token_rewards(base, [conded], tok, beta=beta)[0])
            want = product_ratio_reward(backend, walk, tag, beta)
            _check(
                abs(total - want) < 1e-9,
                f"trial {trial} tag {tag}: telescoped {total} != product {want}",
            )


# --- weight optimization ---

def suite_weight_closed_form_example(fixtures: Path) -> None:
    prior = WeightVector.uniform(2)
    got = optimize_weights(prior, [1.0, 0.0], tau=1.0)
    z = math.exp(-1.0) + 1.0
    expected = (math.exp(-1.0) / z, 1.0 / z)
    for g, w in zip(got.values, expected):
        _check(abs(g - w) < 1e-12, f"closed form {got.values} != {expected}")
    oracle = oracle_optimize_weights(prior, [1.0, 0.0], tau=1.0, resolution=1e-4)
    gap = max(abs(g - o) for g, o in zip(got.values, oracle.values))
    _check(gap <= 1e-4, f"grid oracle gap {gap} > 1e-4")


def suite_weight_oracle_agreement(fixtures: Path) -> None:
    rng = np.random.default_rng(23)
    worst = 0.0
    for _ in range(40):
        prior = WeightVector.normalized(rng.uniform(0.05, 1.0, size=3))
        rewards = rng.uniform(-3.0, 3.0, size=3)
        tau = float(rng.uniform(0.1, 10.0))
        closed = optimize_weights(prior, rewards, tau)
        oracle = oracle_optimize_weights(prior, rewards, tau, resolution=1e-3)
        gap = float(np.max(np.abs(np.asarray(closed.values) - oracle.values)))
        worst = max(worst, gap)
    _check(worst <= 1e-3, f"max infinity-norm gap {worst} > 1e-3")


# --- online optimization ---

def suite_fusion_squared(fixtures: Path) -> None:
    p = np.array([0.5, 0.3, 0.2])
    anchor = LogDistribution((0, 1, 2), np.log(p))
    fused = fuse(anchor, [anchor, anchor], WeightVector.uniform(2))
    direct = p * p / np.sum(p * p)
    for got, want in zip(np.exp(fused.logp), direct):
        _check(abs(got - want) < 1e-14, f"fused {got} != p^2 {want}")
    _check(entropy(fused) < entropy(anchor), "squaring did not sharpen")


def suite_utility_direct(fixtures: Path) -> None:
    pi = LogDistribution((0, 1, 2), np.log([0.5, 0.25, 0.25]))
    base = LogDistribution((0, 1, 2), np.log([0.25, 0.5, 0.25]))
    u = utility(pi, base, alpha=0.5)
    expected = [0.5 * math.log(2.0), -0.5 * math.log(2.0), 0.0]
    for got, want in zip(u, expected):
        _check(abs(got - want) < 1e-14, f"utility {got} != {want}")


def _closed_form_with_checkpoints(anchor, base, cfg, n_steps):
    """Yield (history, pi_prev, pi_t) at each update for oracle comparison."""
    state = initial_state(anchor, base)
    history: list[np.ndarray] = []
    for _ in range(n_steps):
        prev = state.current
        pi_t, state = ftrl_step(state, cfg)
        yield list(history), prev, pi_t
        history.append(utility(pi_t, base, cfg.alpha))


def suite_ftrl_oracle_agreement(fixtures: Path) -> None:
    rng = np.random.default_rng(31)
    worst = 0.0
    for trial in range(12):
        n = int(rng.choice([3, 3, 3, 3, 3, 3, 3, 3, 4, 4, 5, 5]))
        support = tuple(range(n))
        anchor = _rand_dist(rng, support)
        base = _rand_dist(rng, support)
        cfg = FtrlConfig(
            steps=80,
            alpha=float(rng.uniform(0.2, 0.8)),
            lam=float(rng.uniform(0.5, 2.0)),
            eta=float(rng.uniform(5.0, 20.0)),
        )
        n_steps = int(rng.integers(1, 4))
        mode = "grid" if n == 3 else "ascent"
        for history, prev, pi_t in _closed_form_with_checkpoints(
            anchor, base, cfg, n_steps
        ):
            oracle = oracle_ftrl_step(history, prev, anchor, cfg, mode=mode)
            tv = 0.5 * float(np.sum(np.abs(np.exp(pi_t.logp) - np.exp(oracle.logp))))
            worst = max(worst, tv)
    _check(worst <= 2e-3, f"max total variation {worst} > 2e-3")


def suite_ftrl_objective_match(fixtures: Path) -> None:
    rng = np.random.default_rng(37)
    support = (0, 1, 2)
    anchor = _rand_dist(rng, support)
    base = _rand_dist(rng, support)
    cfg = FtrlConfig()
    for history, prev, pi_t in _closed_form_with_checkpoints(anchor, base, cfg, 3):
        oracle = oracle_ftrl_step(history, prev, anchor, cfg, mode="ascent")
        v_closed = ftrl_objective(np.exp(pi_t.logp), history, prev, anchor, cfg)
        v_oracle = ftrl_objective(np.exp(oracle.logp), history, prev, anchor, cfg)
        _check(
            abs(v_closed - v_oracle) <= 1e-4,
            f"objective gap {abs(v_closed - v_oracle)} > 1e-4",
        )
        _check(v_closed >= v_oracle - 1e-9, "closed form is not the maximizer")


def suite_online_divergence_growth(fixtures: Path) -> None:
    anchor = LogDistribution((0, 1, 2), np.log([0.5, 0.3, 0.2]))
    base = LogDistribution((0, 1, 2), np.log([0.2, 0.3, 0.5]))
    cfg = FtrlConfig()
    state = initial_state(anchor, base)
    pi = anchor
    for _ in range(cfg.steps):
        pi, state = ftrl_step(state, cfg)
        _check(pi.is_normalized(), "intermediate iterate not normalized")
    _check(
        kl_divergence(pi, base) > kl_divergence(anchor, base),
        "online loop did not grow divergence from the base",
    )


# --- decoder golden traces ---

def suite_golden_trace_full(fixtures: Path) -> None:
    golden, backend, prefs, cfg = golden_case(fixtures)
    tokens, trace = decode_variant("full", golden["query"], prefs, cfg, backend)
    _check(tokens == golden["full"]["tokens"],
           f"tokens {tokens} != {golden['full']['tokens']}")
    for rec, want in zip(trace.records, golden["full"]["weights"]):
        gap = max(abs(a - b) for a, b in zip(rec.weights, want))
        _check(gap <= 1e-9, f"step {rec.step} weight gap {gap} > 1e-9")
    for rec, want in zip(trace.records, golden["full"]["cumulative"]):
        gap = max(abs(a - b) for a, b in zip(rec.cumulative_rewards, want))
        _check(gap <= 1e-9, f"step {rec.step} cumulative gap {gap} > 1e-9")


def suite_golden_trace_divergence(fixtures: Path) -> None:
    golden, backend, prefs, cfg = golden_case(fixtures)
    tokens, _ = decode_variant("neither", golden["query"], prefs, cfg, backend)
    _check(tokens == golden["neither"]["tokens"],
           f"tokens {tokens} != {golden['neither']['tokens']}")
    full = golden["full"]["tokens"]
    diverged = next(
        (i for i, (a, b) in enumerate(zip(tokens, full)) if a != b), None
    )
    _check(
        diverged == golden["first_divergence_step"],
        f"variants first differ at {diverged}, "
        f"golden says {golden['first_divergence_step']}",
    )


# --- evaluation harness ---

def suite_metrics_recompute(fixtures: Path) -> None:
    rng = np.random.default_rng(41)
    for trial in range(10):
        n = int(rng.integers(1, 21))
        k = int(rng.integers(1, 5))
        values = rng.uniform(1.0, 5.0, size=(n, k))
        got = compute_metrics(ScoreMatrix(values))
        want = metrics_by_loops(values)
        _check(got == want, f"trial {trial}: {got} != {want}")
        _check(got["worst"] <= got["aps"] + 1e-12, "worst > aps")


def suite_sweep_monotonicity(fixtures: Path) -> None:
    backend, prefs, scorers, cfg = sweep_case(fixtures)
    points = pareto_sweep(
        ["How do plants make food?"], prefs, DEFAULT_SWEEP_GRID, cfg, backend, scorers
    )
    s1 = [p.scores[0] for p in points]
    s2 = [p.scores[1] for p in points]
    _check(
        all(a >= b - 1e-12 for a, b in zip(s1, s1[1:])),
        f"objective-1 scores not non-increasing: {s1}",
    )
    _check(
        all(a <= b + 1e-12 for a, b in zip(s2, s2[1:])),
        f"objective-2 scores not non-decreasing: {s2}",
    )


def suite_seeded_ablation_report(fixtures: Path) -> None:
    scorers = (
        SyntheticScorer.token_frequency("a"),
        SyntheticScorer.token_frequency("b"),
    )
    cfg = DecodeConfig(max_tokens=10)
    report = seeded_ablation(range(4), cfg, scorers)
    for variant in ("full", "no_weight_opt", "no_online_opt", "neither"):
        for metric in ("amr", "aps", "worst"):
            cell = report[variant][metric]
            _check(
                math.isfinite(cell["mean"]) and math.isfinite(cell["halfwidth"]),
                f"{variant}/{metric} not finite",
            )
            _check(cell["halfwidth"] >= 0.0, "negative half-width")
        _check(0.0 <= report[variant]["amr"]["mean"] <= 1.0, "amr outside [0,1]")
        _check(1.0 <= report[variant]["aps"]["mean"] <= 5.0, "aps outside [1,5]")


def suite_balancing_gap(fixtures: Path) -> None:
    cfg = DecodeConfig(max_tokens=16)
    wins = 0
    seeds = range(10)
    for seed in seeds:
        backend, prefs, query = synthetic_case(seed)
        _, full = decode_variant("full", query, prefs, cfg, backend)
        _, fixed = decode_variant("no_weight_opt", query, prefs, cfg, backend)
        if reward_gap(full) < reward_gap(fixed):
            wins += 1
    _check(
        wins >= 0.8 * len(seeds),
        f"rebalancing narrowed the reward gap in only {wins}/{len(seeds)} seeds",
    )


# --- prompts and artifacts ---

def suite_anchor_prompt_golden(fixtures: Path) -> None:
    prefs = (
        PreferenceSpec("concise", "Keep the response short and direct.", 0.7),
        PreferenceSpec("vivid", "Use vivid, colorful language.", 0.3),
    )
    got = render_anchor_prompt(prefs, (0.7, 0.3), "How do plants make food?")
    want = (fixtures / "anchor_prompt_golden.txt").read_text(encoding="utf-8")
    _check(got == want, "anchor prompt differs from the reviewed golden file")


def suite_sweep_rerun_bytes(fixtures: Path) -> None:
    backend, prefs, scorers, cfg = sweep_case(fixtures)

    def run() -> str:
        points = pareto_sweep(
            ["How do plants make food?"],
            prefs,
            DEFAULT_SWEEP_GRID,
            cfg,
            backend,
            scorers,
        )
        return pareto_export(points, [p.id for p in prefs])

    first, second = run(), run()
    _check(first == second, "sweep CSV differs between identical reruns")
    _, trace_a = decode_variant("full", "q", prefs, cfg, backend)
    _, trace_b = decode_variant("full", "q", prefs, cfg, backend)
    _check(
        dynamics_export(trace_a) == dynamics_export(trace_b),
        "dynamics CSV differs between identical reruns",
    )


SUITES: tuple[tuple[str, Callable[[Path], None]], ...] = (
    ("normalization_summation", suite_normalization_summation),
    ("kl_hand_value", suite_kl_hand_value),
    ("alignment_mass", suite_alignment_mass),
    ("nucleus_enumeration", suite_nucleus_enumeration),
    ("ngram_hand_count", suite_ngram_hand_count),
    ("batch_vs_sequential", suite_batch_vs_sequential),
    ("token_reward_log_ratio", suite_token_reward_log_ratio),
    ("cumulative_recompute", suite_cumulative_recompute),
    ("telescoping_product", suite_telescoping_product),
    ("weight_closed_form_example", suite_weight_closed_form_example),
    ("weight_oracle_agreement", suite_weight_oracle_agreement),
    ("fusion_squared", suite_fusion_squared),
    ("utility_direct", suite_utility_direct),
    ("ftrl_oracle_agreement", suite_ftrl_oracle_agreement),
    ("ftrl_objective_match", suite_ftrl_objective_match),
    ("online_divergence_growth", suite_online_divergence_growth),
    ("golden_trace_full", suite_golden_trace_full),
    ("golden_trace_divergence", suite_golden_trace_divergence),
    ("metrics_recompute", suite_metrics_recompute),
    ("sweep_monotonicity", suite_sweep_monotonicity),
    ("seeded_ablation_report", suite_seeded_ablation_report),
    ("balancing_gap", suite_balancing_gap),
    ("anchor_prompt_golden", suite_anchor_prompt_golden),
    ("sweep_rerun_bytes", suite_sweep_rerun_bytes),
)


def run_suites(
    fixtures_dir: str | Path = "fixtures",
    stream: TextIO = sys.stdout,
    names: Sequence[str] | None = None,
) -> tuple[int, int]:
    """Run the oracle suites; returns (passed, failed) counts."""
    fixtures = Path(fixtures_dir)
    selected = SUITES if names is None else tuple(
        (n, fn) for n, fn in SUITES if n in set(names)
    )
    passed = failed = 0
    for name, fn in selected:
        try:
            fn(fixtures)
        except Exception as err:
            failed += 1
            print(f"FAIL {name}: {err}", file=stream)
        else:
            passed += 1
            print(f"ok   {name}", file=stream)
    return passed, failed
