import csv
import hashlib
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prefsteer.backends import PolicyBackend
from prefsteer.decoder import (
    VARIANTS,
    DecodeConfig,
    GenerationTrace,
    StepRecord,
    decode_variant,
)
from prefsteer.distributions import Vocab
from prefsteer.errors import EmptyInput, EmptyTrace
from prefsteer.harness import (
    DEFAULT_SWEEP_GRID,
    ParetoPoint,
    ScoreMatrix,
    SyntheticScorer,
    ablation_export,
    ablation_grid,
    compute_metrics,
    dynamics_export,
    dynamics_rows,
    file_sha256,
    manifest_to_json,
    pareto_export,
    pareto_sweep,
    reward_gap,
    run_manifest,
    score_traces,
    seeded_ablation,
    synthetic_case,
)
from prefsteer.rewards import PreferenceSpec

VOCAB = Vocab.from_surfaces(["</s>", "a", "b", "c"], "</s>")


def make_record(step, cum, weights=None, token_id=1):
    k = len(cum)
    w = tuple(1.0 / k for _ in range(k)) if weights is None else tuple(weights)
    return StepRecord(
        step=step,
        token_id=token_id,
        token=VOCAB.surface(token_id),
        token_rewards=tuple(0.0 for _ in range(k)),
        cumulative_rewards=tuple(cum),
        weights=w,
        entropy=0.5,
        base_logp=-1.0,
        final_logp=-1.0,
    )


def make_trace(records, pref_ids=("p", "q"), tokens=None, query="q?"):
    records = tuple(records)
    if tokens is None:
        tokens = tuple(r.token_id for r in records)
    k = len(pref_ids)
    return GenerationTrace(
        query=query,
        variant="full",
        preference_ids=tuple(pref_ids),
        prior=tuple(1.0 / k for _ in range(k)),
        prior_was_normalized=False,
        records=records,
        tokens=tuple(tokens),
        final_text=" ".join(VOCAB.surface(t) for t in tokens if t != VOCAB.eos_id),
        stop_reason="max_tokens",
        config=DecodeConfig(max_tokens=max(1, len(records))),
    )


class TestScoreMatrix:
    def test_copies_and_freezes(self):
        src = np.array([[1.0, 5.0]])
        m = ScoreMatrix(src)
        src[0, 0] = 3.0
        assert m.values[0, 0] == 1.0
        with pytest.raises(ValueError):
            m.values[0, 0] = 2.0

    def test_rejects_non_2d(self):
        with pytest.raises(EmptyInput):
            ScoreMatrix(np.array([1.0, 2.0]))

    def test_rejects_empty(self):
        with pytest.raises(EmptyInput):
            ScoreMatrix(np.zeros((0, 2)))

    @pytest.mark.parametrize("bad", [0.5, 5.1, float("nan"), float("inf")])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            ScoreMatrix(np.array([[3.0, bad]]))


class TestComputeMetrics:
    def test_single_row_hand_values(self):
        # one response scored (5, 5, 5, 2): the 2 misses the threshold of 3
        m = compute_metrics(ScoreMatrix(np.array([[5.0, 5.0, 5.0, 2.0]])))
        assert m["amr"] == 0.0
        assert m["aps"] == 4.25
        assert m["worst"] == 2.0

    def test_threshold_is_inclusive(self):
        m = compute_metrics(ScoreMatrix(np.array([[3.0, 3.0]])))
        assert m["amr"] == 1.0

    def test_threshold_parameter(self):
        scores = ScoreMatrix(np.array([[5.0, 5.0, 5.0, 2.0]]))
        assert compute_metrics(scores, threshold=2.0)["amr"] == 1.0

    def test_mixed_rows(self):
        scores = ScoreMatrix(np.array([[5.0, 4.0], [2.0, 5.0]]))
        m = compute_metrics(scores)
        assert m["amr"] == 0.5
        assert m["aps"] == 4.0
        assert m["worst"] == (4.0 + 2.0) / 2

    @given(
        st.lists(
            st.lists(st.floats(1.0, 5.0), min_size=2, max_size=4),
            min_size=1,
            max_size=8,
        ).filter(lambda rows: len({len(r) for r in rows}) == 1)
    )
    @settings(max_examples=60, deadline=None)
    def test_worst_never_exceeds_average(self, rows):
        m = compute_metrics(ScoreMatrix(np.array(rows)))
        assert m["worst"] <= m["aps"] + 1e-12
        assert 0.0 <= m["amr"] <= 1.0
        assert 1.0 <= m["worst"] <= 5.0
        assert 1.0 <= m["aps"] <= 5.0


class TestSyntheticScorer:
    def test_token_frequency_fraction(self):
        scorer = SyntheticScorer.token_frequency("a")
        ids = [VOCAB.id_of("a"), VOCAB.id_of("a"), VOCAB.id_of("b"), VOCAB.eos_id]
        assert scorer.score("q", ids, VOCAB) == pytest.approx(1.0 + 4.0 * (2 / 3))

    def test_token_frequency_empty_content(self):
        scorer = SyntheticScorer.token_frequency("a")
        assert scorer.score("q", [VOCAB.eos_id], VOCAB) == 1.0

    def test_length_proximity(self):
        scorer = SyntheticScorer.length_proximity(4)
        a = VOCAB.id_of("a")
        assert scorer.score("q", [a] * 4, VOCAB) == 5.0
        assert scorer.score("q", [a] * 2, VOCAB) == 3.0
        # overshoot twice the target clamps at the bottom of the scale
        assert scorer.score("q", [a] * 8, VOCAB) == 1.0

    def test_length_proximity_rejects_non_positive_target(self):
        with pytest.raises(ValueError):
            SyntheticScorer.length_proximity(0)

    def test_marker_presence(self):
        scorer = SyntheticScorer.marker_presence("c")
        assert scorer.score("q", [VOCAB.id_of("c")], VOCAB) == 5.0
        assert scorer.score("q", [VOCAB.id_of("a")], VOCAB) == 1.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            SyntheticScorer("vibes", "a").score("q", [1], VOCAB)

    @given(
        st.sampled_from(["token_frequency", "length_proximity", "marker_presence"]),
        st.lists(st.integers(0, 3), max_size=12),
    )
    @settings(max_examples=80, deadline=None)
    def test_scores_stay_on_scale(self, kind, ids):
        target = "a" if kind != "length_proximity" else 3
        scorer = SyntheticScorer(kind, target)
        assert 1.0 <= scorer.score("q", ids, VOCAB) <= 5.0

    def test_score_traces_shape(self):
        a, b = VOCAB.id_of("a"), VOCAB.id_of("b")
        traces = [
            make_trace([make_record(1, (0.0, 0.0), token_id=a)]),
            make_trace([make_record(1, (0.0, 0.0), token_id=b)]),
        ]
        scorers = [
            SyntheticScorer.token_frequency("a"),
            SyntheticScorer.token_frequency("b"),
        ]
        m = score_traces(traces, scorers, VOCAB)
        assert m.values.shape == (2, 2)
        assert m.values[0, 0] == 5.0 and m.values[0, 1] == 1.0
        assert m.values[1, 0] == 1.0 and m.values[1, 1] == 5.0


class TestParetoSweep:
    def test_default_grid_is_on_simplex(self):
        assert len(DEFAULT_SWEEP_GRID) == 6
        for a, b in DEFAULT_SWEEP_GRID:
            assert a >= 0 and b >= 0
            assert abs(a + b - 1.0) < 1e-9

    def test_rejects_wrong_preference_count(self, sweep_fixture):
        backend, prefs, scorers, cfg = sweep_fixture
        with pytest.raises(ValueError):
            pareto_sweep(["a"], prefs[:1], DEFAULT_SWEEP_GRID, cfg, backend, scorers)

    @pytest.mark.parametrize("pair", [(0.5, 0.4), (1.2, -0.2), (0.5, 0.5, 0.0)])
    def test_rejects_off_simplex_pairs(self, sweep_fixture, pair):
        backend, prefs, scorers, cfg = sweep_fixture
        with pytest.raises(ValueError):
            pareto_sweep(["a"], prefs, [pair], cfg, backend, scorers)

    def test_endpoints_favor_their_objective(self, sweep_fixture):
        backend, prefs, scorers, cfg = sweep_fixture
        pts = pareto_sweep(
            ["a"], prefs, [(1.0, 0.0), (0.0, 1.0)], cfg, backend, scorers
        )
        all_a, all_b = pts
        assert all_a.scores[0] > all_b.scores[0]
        assert all_b.scores[1] > all_a.scores[1]

    def test_relabeling_symmetry(self, sweep_fixture):
        # swapping preference and scorer order mirrors every point exactly
        backend, prefs, scorers, cfg = sweep_fixture
        grid = [(1.0, 0.0), (0.6, 0.4), (0.2, 0.8)]
        fwd = pareto_sweep(["a"], prefs, grid, cfg, backend, scorers)
        rev = pareto_sweep(
            ["a"],
            (prefs[1], prefs[0]),
            [(b, a) for a, b in grid],
            cfg,
            backend,
            (scorers[1], scorers[0]),
        )
        for f, r in zip(fwd, rev):
            assert r.weights == (f.weights[1], f.weights[0])
            assert r.scores == (f.scores[1], f.scores[0])

    def test_decode_failure_is_wrapped(self, sweep_fixture):
        backend, prefs, scorers, cfg = sweep_fixture

        class Dead(PolicyBackend):
            vocab = backend.vocab

            def next_token_logprobs(self, ctx):
                raise RuntimeError("no service")

        with pytest.raises(RuntimeError, match="sweep cell failed") as err:
            pareto_sweep(["a"], prefs, [(0.5, 0.5)], cfg, Dead(), scorers)
        assert err.value.__cause__ is not None

    def test_export_round_trip(self):
        pts = [ParetoPoint((1.0, 0.0), (4.2, 1.3)), ParetoPoint((0.5, 0.5), (3.0, 3.0))]
        text = pareto_export(pts, ["left", "right"])
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["weight_left", "weight_right", "score_left", "score_right"]
        assert [float(x) for x in rows[1]] == [1.0, 0.0, 4.2, 1.3]
        assert [float(x) for x in rows[2]] == [0.5, 0.5, 3.0, 3.0]


class TestAblation:
    def test_grid_covers_variants_in_order(self, sweep_fixture):
        backend, prefs, scorers, cfg = sweep_fixture
        grid = ablation_grid(["a"], prefs, cfg, backend, scorers)
        assert tuple(grid.keys()) == VARIANTS
        for metrics in grid.values():
            assert set(metrics) == {"amr", "aps", "worst"}

    def test_seeded_ablation_shape(self):
        cfg = DecodeConfig(max_tokens=8)
        scorers = [
            SyntheticScorer.token_frequency("a"),
            SyntheticScorer.token_frequency("b"),
        ]
        report = seeded_ablation([0, 1, 2], cfg, scorers)
        assert tuple(report.keys()) == VARIANTS
        for metrics in report.values():
            for name in ("amr", "aps", "worst"):
                cell = metrics[name]
                assert math.isfinite(cell["mean"])
                assert cell["halfwidth"] >= 0.0

    def test_seeded_ablation_single_seed_has_zero_halfwidth(self):
        cfg = DecodeConfig(max_tokens=6)
        scorers = [
            SyntheticScorer.token_frequency("a"),
            SyntheticScorer.token_frequency("b"),
        ]
        report = seeded_ablation([3], cfg, scorers)
        assert report["full"]["aps"]["halfwidth"] == 0.0

    def test_seeded_ablation_custom_factory(self, sweep_fixture):
        backend, prefs, scorers, cfg = sweep_fixture
        calls = []

        def factory(seed):
            calls.append(seed)
            return backend, prefs, "a"

        report = seeded_ablation([5, 9], cfg, scorers, case_factory=factory)
        assert calls == [5, 9]
        # a fixed case gives identical samples, so spread collapses to zero
        assert report["full"]["aps"]["halfwidth"] == 0.0

    def test_export_round_trip(self, sweep_fixture):
        backend, prefs, scorers, cfg = sweep_fixture
        grid = ablation_grid(["a"], prefs, cfg, backend, scorers)
        rows = list(csv.reader(io.StringIO(ablation_export(grid))))
        assert rows[0] == ["variant", "amr", "aps", "worst"]
        assert [r[0] for r in rows[1:]] == list(VARIANTS)
        for row, variant in zip(rows[1:], VARIANTS):
            assert float(row[2]) == grid[variant]["aps"]


class TestDynamics:
    def test_rows_cover_every_step_and_preference(self):
        trace = make_trace(
            [make_record(1, (0.1, 0.2)), make_record(2, (0.3, 0.4), (0.7, 0.3))]
        )
        rows = dynamics_rows(trace)
        assert len(rows) == 4
        assert rows[0] == (1, "p", 0.1, 0.5)
        assert rows[3] == (2, "q", 0.4, 0.3)

    def test_export_round_trip(self):
        trace = make_trace([make_record(1, (1 / 3, 2 / 3))])
        text = dynamics_export(trace)
        rows = list(csv.reader(io.StringIO(text)))
        assert rows[0] == ["step", "pref_id", "cumulative_reward", "weight"]
        # repr round-trips floats exactly
        assert float(rows[1][2]) == 1 / 3
        assert float(rows[2][2]) == 2 / 3

    def test_empty_trace_rejected(self):
        trace = make_trace([], tokens=[])
        with pytest.raises(EmptyTrace):
            dynamics_rows(trace)
        with pytest.raises(EmptyTrace):
            reward_gap(trace)


class TestRewardGap:
    def test_hand_value(self):
        trace = make_trace(
            [make_record(1, (1.0, 3.5)), make_record(2, (2.0, 2.5))]
        )
        assert reward_gap(trace) == 2.5

    def test_requires_two_preferences(self):
        trace = make_trace(
            [make_record(1, (1.0, 2.0, 3.0))], pref_ids=("p", "q", "r")
        )
        with pytest.raises(ValueError):
            reward_gap(trace)


class TestManifest:
    def test_file_sha256_matches_hashlib(self, tmp_path):
        path = tmp_path / "blob.bin"
        path.write_bytes(b"steering\n")
        assert file_sha256(path) == hashlib.sha256(b"steering\n").hexdigest()

    def test_run_manifest_contents(self, tmp_path):
        pa = tmp_path / "b.txt"
        pb = tmp_path / "a.txt"
        pa.write_text("x")
        pb.write_text("y")
        manifest = run_manifest(DecodeConfig().echo(), [0, 7], [pa, pb])
        assert set(manifest) == {"config", "seeds", "fixtures"}
        assert manifest["seeds"] == [0, 7]
        # fixture paths are sorted so the record is order-independent
        assert list(manifest["fixtures"]) == sorted([str(pa), str(pb)])
        assert manifest["fixtures"][str(pa)] == file_sha256(pa)

    def test_manifest_json_is_stable(self, tmp_path):
        path = tmp_path / "f.txt"
        path.write_text("data")
        manifest = run_manifest(DecodeConfig().echo(), [1], [path])
        text = manifest_to_json(manifest)
        assert text == manifest_to_json(run_manifest(DecodeConfig().echo(), [1], [path]))
        assert text.endswith("\n")
        assert json.loads(text) == manifest


class TestSyntheticCase:
    def test_deterministic_per_seed(self):
        cfg = DecodeConfig(max_tokens=8)
        backend_a, prefs_a, query_a = synthetic_case(7)
        backend_b, prefs_b, query_b = synthetic_case(7)
        assert prefs_a == prefs_b and query_a == query_b
        tokens_a, _ = decode_variant("full", query_a, prefs_a, cfg, backend_a)
        tokens_b, _ = decode_variant("full", query_b, prefs_b, cfg, backend_b)
        assert tokens_a == tokens_b

    def test_preferences_conflict(self):
        backend, prefs, query = synthetic_case(0)
        assert [p.id for p in prefs] == ["likes_a", "likes_b"]
        assert all(p.initial_weight == 0.5 for p in prefs)
        assert query == "c"
        assert len(backend.vocab) == 4
