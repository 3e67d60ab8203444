import csv

import numpy as np
import pytest

from tuneconv.analysis import (OVERHEAD_CSV_FIELDS, bench_aggregation,
                               bench_overhead, extract_kernel_trajectories,
                               format_sweep_table, model_objective_ids,
                               principal_direction, sweep_eval,
                               trajectories_to_checkpoint, write_overhead_csv,
                               write_sweep_csv)
from tuneconv.checkpoint import Checkpoint
from tuneconv.layers import ModelConfig, build_backbone
from tuneconv.tensor import DomainError, Tensor


def grid(p=2, steps=5):
    return [[w, 1.0 - w] for w in np.linspace(0, 1, steps)][:steps] if p == 2 \
        else [[w] for w in np.linspace(0, 1, steps)]


class TestPrincipalDirection:
    def test_exact_line(self):
        t = np.linspace(0, 1, 7)[:, None]
        d = np.array([[3.0, 4.0, 0.0]])
        points = t @ d + 1.0
        pc1, evr = principal_direction(points)
        assert evr == pytest.approx(1.0, abs=1e-12)
        cos = abs(pc1 @ (d[0] / np.linalg.norm(d[0])))
        assert cos == pytest.approx(1.0, abs=1e-10)

    def test_matches_svd_oracle(self):
        rng = np.random.default_rng(0)
        points = rng.standard_normal((12, 30))
        pc1, evr = principal_direction(points)
        centered = points - points.mean(axis=0)
        _, s, vt = np.linalg.svd(centered, full_matrices=False)
        assert abs(pc1 @ vt[0]) == pytest.approx(1.0, abs=1e-6)
        assert evr == pytest.approx(s[0] ** 2 / (s ** 2).sum(), abs=1e-9)

    def test_degenerate_single_point(self):
        pc1, evr = principal_direction(np.ones((3, 5)))
        assert evr == 1.0
        np.testing.assert_array_equal(pc1, 0.0)


class TestTrajectories:
    def _model(self, p=2, seed=0):
        cfg = ModelConfig(blocks=1, channels=4, p=p, variant="tunable")
        model = build_backbone(cfg, seed=seed)
        # random mapper so the trajectory is a nontrivial line
        rng = np.random.default_rng(seed + 100)
        for _, layer in [("h", model.head), ("t", model.tail)]:
            layer.mapper.weight.data = rng.standard_normal((p, p)).astype(np.float32)
            layer.mapper.bias.data = rng.standard_normal(p).astype(np.float32)
        return model

    def test_p1_trajectory_single_line(self):
        model = self._model(p=1)
        traj = extract_kernel_trajectories(model, [[0.0], [0.5], [1.0]])
        for rec in traj.values():
            assert rec["explained_variance"] == pytest.approx(1.0, abs=1e-9)

    def test_midpoint_on_segment(self):
        model = self._model()
        traj = extract_kernel_trajectories(
            model, [[0.0, 1.0], [0.5, 0.5], [1.0, 0.0]])
        for rec in traj.values():
            pts = rec["points"]
            np.testing.assert_allclose(pts[1], (pts[0] + pts[2]) / 2, atol=1e-9)

    def test_collinear_grid_high_explained_variance(self):
        model = self._model()
        traj = extract_kernel_trajectories(model, grid(steps=9))
        for rec in traj.values():
            assert rec["explained_variance"] >= 0.999

    def test_layer_names_cover_model(self):
        model = self._model()
        traj = extract_kernel_trajectories(model, grid())
        assert set(traj) == {"head", "block0.conv1", "block0.conv2", "tail"}

    def test_traditional_model_rejected(self):
        cfg = ModelConfig(blocks=1, channels=4, variant="traditional")
        model = build_backbone(cfg, seed=0)
        with pytest.raises(DomainError):
            extract_kernel_trajectories(model, [[0.5]])

    def test_export_round_trip(self, tmp_path):
        model = self._model()
        traj = extract_kernel_trajectories(model, grid())
        ckpt = trajectories_to_checkpoint(traj)
        assert ckpt.meta["kind"] == "trajectories"
        path = tmp_path / "traj.tcnv"
        ckpt.save(path)
        back = Checkpoint.load(path)
        np.testing.assert_allclose(back.arrays["head.points"],
                                   traj["head"]["points"], rtol=1e-6)
        evs = {rec["name"]: rec["explained_variance"]
               for rec in back.meta["layers"]}
        assert evs["head"] >= 0.999


class TestBench:
    def test_rows_and_csv_schema(self, tmp_path):
        rows = bench_overhead(ks=(3,), cs=(4,), ps=(1, 2), size=16, reps=10,
                              warmup=2)
        assert len(rows) == 2
        for row in rows:
            assert row["traditional_us"] > 0
            assert row["tunable_us"] > 0
        path = tmp_path / "bench.csv"
        write_overhead_csv(rows, path)
        with open(path) as f:
            reader = csv.DictReader(f)
            assert tuple(reader.fieldnames) == OVERHEAD_CSV_FIELDS
            assert len(list(reader)) == 2

    def test_p1_bypass_near_zero_overhead(self):
        rows = bench_overhead(ks=(3,), cs=(8,), ps=(1,), size=32, reps=30,
                              warmup=5)
        assert abs(rows[0]["overhead_pct"]) < 50.0  # same code path, noise only

    def test_reps_floor(self):
        with pytest.raises(DomainError):
            bench_overhead(reps=5)

    def test_aggregation_size_independent(self):
        out = bench_aggregation(k=3, c=16, p=4, sizes=(32, 128), reps=50,
                                warmup=10)
        a, b = out[32]["us"], out[128]["us"]
        # aggregation never touches the input, so 16x more pixels must not
        # change its cost beyond timer noise
        assert b < 5.0 * a


class TestSweep:
    class Identity:
        class config:
            variant = "traditional"
            p = 1

        def forward(self, x, omega=None):
            return x

    def test_identity_model_matches_floor(self, corpus_images):
        rows = sweep_eval(self.Identity(), corpus_images[:2], [25.0], [0.0],
                          [[1.0]])
        assert rows[0]["psnr"] == pytest.approx(rows[0]["identity_psnr"], abs=1e-9)

    def test_row_grid_shape(self, corpus_images):
        rows = sweep_eval(self.Identity(), corpus_images[:2], [10.0, 25.0],
                          [0.0], [[0.0], [1.0]])
        assert len(rows) == 4
        assert {r["sigma"] for r in rows} == {10.0, 25.0}

    def test_empty_dataset_rejected(self):
        with pytest.raises(DomainError):
            sweep_eval(self.Identity(), [], [25.0], [0.0], [[1.0]])

    def test_csv_and_table(self, tmp_path, corpus_images):
        rows = sweep_eval(self.Identity(), corpus_images[:2], [25.0], [0.0],
                          [[0.0], [1.0]])
        path = tmp_path / "sweep.csv"
        write_sweep_csv(rows, path)
        with open(path) as f:
            reader = csv.DictReader(f)
            assert reader.fieldnames[0] == "omega_1"
            assert "identity_psnr" in reader.fieldnames
            assert len(list(reader)) == 2
        table = format_sweep_table(rows)
        assert "PSNR" in table.splitlines()[0]
        assert len(table.splitlines()) == 3


class TestObjectiveIds:
    def test_tagged_model(self):
        model = build_backbone(ModelConfig(blocks=1, channels=4, p=2,
                                           variant="tunable"), seed=0)
        model.objective_ids = ["noise", "blur"]
        assert model_objective_ids(model) == ["noise", "blur"]

    def test_untagged_fallback(self):
        model = build_backbone(ModelConfig(blocks=1, channels=4, p=2,
                                           variant="tunable"), seed=0)
        assert model_objective_ids(model) == ["rec", "noise"]
