"""Tests for the Monte-Carlo experiment pipelines.

Kept at toy sizes: what matters here is that the a-priori error bounds
dominate the measured distances row by row, that every pipeline is
bit-for-bit reproducible under a fixed seed, and that the emitted
artifacts carry the documented schema. The paper-scale statistics are
exercised by the acceptance suite.
"""

import json

import numpy as np
import pytest

from cxproj.experiments import (
    ExperimentConfig,
    black_scholes_best_of,
    corner_cluster_fraction,
    exp_2d_explicit,
    exp_bestof,
    exp_convergence,
    exp_table1,
    median_loglog_slope,
)


class TestConvergence:
    def test_bounds_dominate_distances(self, tmp_path):
        cfg = ExperimentConfig(sizes=(16, 32), runs=3, seed=9, out_dir=tmp_path)
        rows = exp_convergence(cfg)
        assert len(rows) == 6
        for row in rows:
            assert 0.0 < row["dist_down"] <= row["bound_down"] + 1e-12
            assert 0.0 < row["dist_up"] <= row["bound_up"] + 1e-12
            assert (
                0.0
                < row["dist_down_centered"]
                <= row["bound_down_centered"] + 1e-12
            )
            assert (
                0.0 < row["dist_up_centered"] <= row["bound_up_centered"] + 1e-12
            )

    def test_reproducible_bit_for_bit(self, tmp_path):
        cfg_a = ExperimentConfig(sizes=(16,), runs=2, seed=4, out_dir=tmp_path / "a")
        cfg_b = ExperimentConfig(sizes=(16,), runs=2, seed=4, out_dir=tmp_path / "b")
        assert exp_convergence(cfg_a) == exp_convergence(cfg_b)

    def test_csv_layout(self, tmp_path):
        cfg = ExperimentConfig(sizes=(8,), runs=2, seed=1, out_dir=tmp_path)
        exp_convergence(cfg)
        lines = (tmp_path / "convergence.csv").read_text().splitlines()
        assert lines[0] == "# schema=convergence-v1"
        assert lines[1].split(",")[:4] == ["I", "run", "dist_down", "bound_down"]
        assert len(lines) == 2 + 2  # comment, header, one row per run

    def test_slope_of_exact_power_law(self):
        rows = [
            {"I": size, "value": size**-0.5}
            for size in (32, 64, 128)
            for _ in range(3)
        ]
        assert median_loglog_slope(rows, "value") == pytest.approx(-0.5, abs=1e-12)
        with pytest.raises(ValueError):
            median_loglog_slope(rows[:3], "value")


class TestTable1:
    def test_small_sample_agreement(self, tmp_path):
        cfg = ExperimentConfig(sizes=(10,), runs=1, seed=20240, out_dir=tmp_path)
        rows = exp_table1(cfg)
        assert rows[0]["qp_certified"] == 1
        assert rows[0]["w2_explicit_vs_qp"] <= 5e-5
        assert (tmp_path / "table1.csv").read_text().startswith(
            "# schema=table1-v1"
        )


class TestCornerClusterFraction:
    def test_exact_corner_counts_fully(self):
        x = np.array([[0.0, 0.0]])
        y = np.array([[1.0, -1.0]])
        pi = np.array([[1.0]])
        assert corner_cluster_fraction(pi, x, y) == 1.0

    def test_off_corner_drops_out(self):
        x = np.array([[0.0, 0.0]])
        y = np.array([[1.3, 1.0]])
        pi = np.array([[1.0]])
        assert corner_cluster_fraction(pi, x, y) == 0.0

    def test_dust_entries_ignored(self):
        x = np.array([[0.0, 0.0]])
        y = np.array([[1.0, 1.0]])
        pi = np.array([[1e-9]])
        assert corner_cluster_fraction(pi, x, y) == 0.0


class TestTwoDimensionalStudy:
    def test_smoke_payload_and_determinism(self, tmp_path):
        cfg = ExperimentConfig(sizes=(20,), runs=2, seed=77, out_dir=tmp_path)
        payload = exp_2d_explicit(cfg)
        assert payload["I"] == 20
        assert len(payload["values"]) == 2
        assert payload["mean"] > 0.0
        assert 0.0 <= payload["cluster_fraction"] <= 1.0
        on_disk = json.loads((tmp_path / "exp_2d.json").read_text())
        assert on_disk == payload
        again = exp_2d_explicit(
            ExperimentConfig(sizes=(20,), runs=2, seed=77, out_dir=tmp_path / "b")
        )
        assert again["values"] == payload["values"]


class TestBestOf:
    def test_reference_price_scale(self):
        price = black_scholes_best_of(seed=5, paths=200_000)
        assert 0.31 <= price <= 0.38
        assert price == black_scholes_best_of(seed=5, paths=200_000)

    def test_smoke_bounds_bracket_reference(self, tmp_path):
        cfg = ExperimentConfig(sizes=(40,), runs=2, seed=13, out_dir=tmp_path)
        payload = exp_bestof(cfg)
        assert payload["lower"] <= payload["upper"]
        # model-free bounds must straddle the model price
        assert payload["lower"] <= payload["bs_price"] <= payload["upper"]
        assert (tmp_path / "bestof.json").exists()


class TestConfigValidation:
    def test_rejects_bad_fields(self):
        with pytest.raises(ValueError):
            ExperimentConfig(sizes=())
        with pytest.raises(ValueError):
            ExperimentConfig(sizes=(0,))
        with pytest.raises(ValueError):
            ExperimentConfig(runs=0)
        with pytest.raises(ValueError):
            ExperimentConfig(rho=0.5)
