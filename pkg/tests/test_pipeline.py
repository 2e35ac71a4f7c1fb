"""Norm sweep, class-count detection, coarse-graining, artifacts, CLI."""

import json

import numpy as np
import pytest

from dualce import (
    DualMatrix,
    PipelineConfig,
    SweepRecord,
    SweepTable,
    WITH_INFINITESIMAL,
    WITHOUT_INFINITESIMAL,
    analyze,
    coarse_grain,
    detect_k,
    dual_singular_values,
    dual_vector_norm,
    kmeans,
    norm_sweep,
    run_pipeline,
    schatten_norm,
    validate_tpm,
)
from dualce.cli import main
from dualce.pipeline import StageError, random_initial_state
from tests.conftest import random_dtpm, random_permutation_matrix


@pytest.fixture(scope="module")
def fitted(tiny_config):
    return analyze(tiny_config)


class TestNormSweep:
    def test_permutation_rows(self):
        rng = np.random.default_rng(0)
        p = DualMatrix(random_permutation_matrix(rng, 6), np.zeros((6, 6)))
        table = norm_sweep(p, (1.0, 1.5))
        assert table.rank == 6
        assert len(table.records) == 12
        for r in table.records:
            assert r.infinitesimal == pytest.approx(0.0, abs=1e-12)
            assert r.standard == pytest.approx(r.k ** (1.0 / r.p), abs=1e-10)

    def test_standard_part_structure(self):
        rng = np.random.default_rng(1)
        p = random_dtpm(rng, 7)
        table = norm_sweep(p, (1.3, 1.9))
        for q in (1.3, 1.9):
            col = table.column(q)
            vals = [r.standard for r in col]
            assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
            # k = rank specializes to the Schatten norm
            assert vals[-1] == pytest.approx(schatten_norm(p, q).s, abs=1e-9)
            # cross-check against the dual singular values
            for r in col:
                expect = dual_vector_norm(dual_singular_values(p, r.k), q)
                assert r.standard == pytest.approx(expect.s, abs=1e-8)
                assert r.infinitesimal == pytest.approx(expect.i, abs=1e-8)

    def test_p_one_dispatch(self):
        rng = np.random.default_rng(2)
        p = random_dtpm(rng, 5)
        table = norm_sweep(p, (1.0,))
        from dualce import ky_fan_norm

        for r in table.column(1.0):
            direct = ky_fan_norm(p, r.k)
            assert r.standard == pytest.approx(direct.s, abs=1e-12)
            assert r.infinitesimal == pytest.approx(direct.i, abs=1e-12)

    def test_input_validation(self):
        rng = np.random.default_rng(3)
        p = random_dtpm(rng, 4)
        with pytest.raises(ValueError):
            norm_sweep(p, ())
        with pytest.raises(ValueError):
            norm_sweep(p, (2.5,))
        with pytest.raises(ValueError):
            norm_sweep(DualMatrix(np.zeros((3, 3)), np.eye(3)), (1.5,))


def make_table(per_p_infinitesimals, p_list):
    records = []
    for q, col in zip(p_list, per_p_infinitesimals):
        for k, val in enumerate(col, start=1):
            records.append(SweepRecord(k, q, float(k), float(val), 0.0))
    return SweepTable(tuple(records), tuple(p_list), len(per_p_infinitesimals[0]))


class TestDetectK:
    def test_engineered_peak(self):
        # diagonal dual matrix: infinitesimal sweep has a built-in running
        # maximum at k = 3 (positive increments through 3, negative after)
        p_s = np.diag([5.0, 4.0, 3.0, 2.0, 1.0])
        p_i = np.diag([1.0, 1.0, 1.0, -1.0, -1.0])
        det = detect_k(norm_sweep(DualMatrix(p_s, p_i), (1.3, 1.6, 1.9)))
        assert det.k_star == 3
        assert det.unanimous
        assert not any(flag for _, _, flag in det.per_p)

    def test_zero_infinitesimal_is_degenerate(self):
        rng = np.random.default_rng(5)
        p = DualMatrix(random_permutation_matrix(rng, 5), np.zeros((5, 5)))
        det = detect_k(norm_sweep(p, (1.3, 1.6)))
        assert det.k_star == 1
        assert all(flag for _, _, flag in det.per_p)

    def test_tie_breaks_to_smallest_k(self):
        table = make_table([[2.0, 2.0, 1.0]], [1.3])
        assert detect_k(table).k_star == 1

    def test_modal_vote(self):
        table = make_table(
            [[0, 1, 0], [0, 1, 0], [0, 0, 1]], [1.3, 1.6, 1.9]
        )
        det = detect_k(table)
        assert det.k_star == 2
        assert not det.unanimous

    def test_equal_votes_take_smallest(self):
        table = make_table([[0, 1], [1, 0]], [1.3, 1.6])
        assert detect_k(table).k_star == 1

    def test_rescaling_invariance(self):
        rng = np.random.default_rng(6)
        p = random_dtpm(rng, 6)
        base = detect_k(norm_sweep(p, (1.3, 1.6, 1.9)))
        for c in (1e-3, 7.0, 1e4):
            scaled = detect_k(norm_sweep(DualMatrix(p.s, c * p.i), (1.3, 1.6, 1.9)))
            assert scaled.k_star == base.k_star
            assert [k for _, k, _ in scaled.per_p] == [
                k for _, k, _ in base.per_p
            ]


class TestKmeans:
    def test_two_separated_clusters(self):
        pts = np.array([[0.0], [0.1], [0.2], [10.0], [10.1], [10.2]])
        labels = kmeans(pts, 2, seed=0)
        assert len(set(labels[:3])) == 1
        assert len(set(labels[3:])) == 1
        assert labels[0] != labels[3]

    def test_identical_points_single_cluster(self):
        pts = np.ones((5, 3))
        assert set(kmeans(pts, 1, seed=1)) == {0}

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(7)
        pts = rng.standard_normal((30, 4))
        a = kmeans(pts, 3, seed=9)
        b = kmeans(pts, 3, seed=9)
        assert np.array_equal(a, b)

    def test_k_larger_than_points(self):
        with pytest.raises(ValueError):
            kmeans(np.ones((2, 2)), 3, seed=0)


class TestCoarseGrain:
    def test_block_diagonal_recovery(self):
        rng = np.random.default_rng(8)
        blocks = []
        for _ in range(2):
            b = rng.uniform(0.5, 1.0, size=(3, 3))
            blocks.append(b / b.sum(axis=0, keepdims=True))
        p_s = np.zeros((6, 6))
        p_s[:3, :3] = blocks[0]
        p_s[3:, 3:] = blocks[1]
        cg = coarse_grain(DualMatrix(p_s, np.zeros((6, 6))), 2, seed=0)
        labels = cg.labels
        assert len(set(labels[:3])) == 1 and len(set(labels[3:])) == 1
        assert labels[0] != labels[3]
        validate_tpm(cg.upsilon)
        # no cross-block mass at all
        assert cg.upsilon == pytest.approx(np.eye(2))

    def test_k_one(self):
        rng = np.random.default_rng(9)
        cg = coarse_grain(random_dtpm(rng, 5), 1, seed=0)
        assert cg.upsilon == pytest.approx(np.ones((1, 1)))
        assert np.array_equal(cg.phi, np.ones((5, 1)))

    def test_methods_agree_when_infinitesimal_is_zero(self):
        rng = np.random.default_rng(10)
        p = DualMatrix(random_dtpm(rng, 8).s, np.zeros((8, 8)))
        a = coarse_grain(p, 3, method=WITH_INFINITESIMAL, seed=5)
        b = coarse_grain(p, 3, method=WITHOUT_INFINITESIMAL, seed=5)
        assert np.array_equal(a.labels, b.labels)

    def test_phi_rows_one_hot_and_upsilon_stochastic(self):
        rng = np.random.default_rng(11)
        p = random_dtpm(rng, 7)
        cg = coarse_grain(p, 3, seed=2)
        assert np.array_equal(cg.phi.sum(axis=1), np.ones(7))
        validate_tpm(cg.upsilon)
        assert sorted(set(cg.labels)) == [0, 1, 2]

    def test_k_out_of_range(self):
        rng = np.random.default_rng(12)
        p = random_dtpm(rng, 4)
        with pytest.raises(ValueError):
            coarse_grain(p, 0)
        with pytest.raises(ValueError):
            coarse_grain(p, 5)

    def test_unknown_method(self):
        rng = np.random.default_rng(13)
        with pytest.raises(ValueError):
            coarse_grain(random_dtpm(rng, 4), 2, method="sideways")


class TestConfig:
    def test_child_seeds_are_distinct_and_stable(self):
        cfg = PipelineConfig(seed=3)
        seeds = cfg.child_seeds()
        assert set(seeds) == {"topology", "x1", "kmeans"}
        assert len(set(seeds.values())) == 3
        assert seeds == PipelineConfig(seed=3).child_seeds()
        assert seeds != PipelineConfig(seed=4).child_seeds()

    def test_dict_roundtrip(self):
        cfg = PipelineConfig(seed=5, p_list=(1.2, 1.7), t=100)
        back = PipelineConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert back == cfg

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig.from_dict({"speed": 11})

    def test_random_initial_state(self):
        x = random_initial_state(20, seed=4)
        assert x.shape == (20,)
        assert x.sum() == pytest.approx(1.0)
        assert np.min(x) >= 0.0
        assert np.array_equal(x, random_initial_state(20, seed=4))


class TestAnalyze:
    def test_tiny_run_completes(self, fitted, tiny_config):
        res = fitted
        n = 2 * (2 + 2) + 1
        assert res.m.shape == (n, n)
        assert res.p.shape == (n, n)
        assert len(res.sweep.records) == res.sweep.rank * len(tiny_config.p_list)
        assert 1 <= res.detection.k_star <= res.sweep.rank
        assert set(res.coarse) == {WITH_INFINITESIMAL, WITHOUT_INFINITESIMAL}
        assert res.ei_micro >= 0.0

    def test_stage_attribution(self):
        bad = PipelineConfig(far_weight=2, near_weight=2, bar=1, coupling_scale=-1.0)
        with pytest.raises(StageError, match="generate"):
            analyze(bad)


class TestArtifacts:
    def test_file_set_and_shapes(self, tiny_config, tmp_path):
        manifest = run_pipeline(tiny_config, tmp_path)
        names = {p.name for p in tmp_path.iterdir()}
        assert names == {
            "generator.csv",
            "p_standard.csv",
            "p_infinitesimal.csv",
            "sweep.csv",
            "detection.json",
            "coarse.json",
            "fit.json",
            "manifest.json",
        }
        lines = (tmp_path / "sweep.csv").read_text().strip().splitlines()
        assert lines[0] == "k,p,standard,infinitesimal,delta_gamma"
        rank_rows = len(lines) - 1
        assert rank_rows % len(tiny_config.p_list) == 0
        detection = json.loads((tmp_path / "detection.json").read_text())
        assert {"k_star", "per_p", "unanimous"} <= set(detection)
        assert manifest["config"]["seed"] == tiny_config.seed
        assert "macro" in manifest["ei"]

    def test_json_format(self, tiny_config, tmp_path):
        run_pipeline(tiny_config, tmp_path, fmt="json")
        assert (tmp_path / "generator.json").exists()
        assert not (tmp_path / "generator.csv").exists()
        with pytest.raises(ValueError):
            run_pipeline(tiny_config, tmp_path, fmt="xml")

    def test_byte_identical_across_runs(self, tiny_config, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_pipeline(tiny_config, a)
        run_pipeline(tiny_config, b)
        for path in sorted(a.iterdir()):
            twin = b / path.name
            assert path.read_bytes() == twin.read_bytes(), path.name


class TestCli:
    def config_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(
            json.dumps({"far_weight": 2, "near_weight": 2, "bar": 1, "t": 50})
        )
        return path

    def test_pipeline_subcommand(self, tmp_path, capsys):
        cfg = self.config_file(tmp_path)
        code = main(
            ["pipeline", "--config", str(cfg), "--seed", "7",
             "--out", str(tmp_path / "run")]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "k_star=" in out
        assert (tmp_path / "run" / "manifest.json").exists()

    def test_detect_subcommand(self, tmp_path, capsys):
        cfg = self.config_file(tmp_path)
        code = main(
            ["detect", "--config", str(cfg), "--seed", "7",
             "--out", str(tmp_path / "d"), "--p-list", "1.3,1.6"]
        )
        assert code == 0
        detection = json.loads((tmp_path / "d" / "detection.json").read_text())
        assert {rec["p"] for rec in detection["per_p"]} == {1.3, 1.6}

    def test_generate_and_fit_subcommands(self, tmp_path):
        cfg = self.config_file(tmp_path)
        assert main(["generate", "--config", str(cfg),
                     "--out", str(tmp_path / "g")]) == 0
        assert (tmp_path / "g" / "generator.csv").exists()
        assert main(["fit", "--config", str(cfg),
                     "--out", str(tmp_path / "f")]) == 0
        assert (tmp_path / "f" / "fit.json").exists()

    def test_bad_config_exits_two(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        code = main(["pipeline", "--config", str(path), "--out", str(tmp_path)])
        assert code == 2
        assert "bad configuration" in capsys.readouterr().err

    def test_unknown_config_key_exits_two(self, tmp_path):
        path = tmp_path / "odd.json"
        path.write_text(json.dumps({"warp": 9}))
        assert main(["detect", "--config", str(path),
                     "--out", str(tmp_path)]) == 2

    def test_cli_run_is_deterministic(self, tmp_path):
        cfg = self.config_file(tmp_path)
        for sub in ("x", "y"):
            assert main(["pipeline", "--config", str(cfg),
                         "--out", str(tmp_path / sub)]) == 0
        for path in sorted((tmp_path / "x").iterdir()):
            assert path.read_bytes() == (tmp_path / "y" / path.name).read_bytes()
