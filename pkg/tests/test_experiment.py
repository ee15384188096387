import json
import math

import numpy as np
import pytest

from dynplace.experiment import (
    ExperimentConfig,
    InvariantViolation,
    RunRecord,
    config_from_mapping,
    ingest_grid_csv,
    load_config,
    make_scenario,
    read_grid_csv,
    run_dynamic,
    run_experiment,
    run_static,
    sweep_k,
    synthetic_sst_grid,
    write_outputs,
)
from dynplace.graph import GraphError
from dynplace.sampling import SamplingOperator, reconstruct

SMALL = dict(n_nodes=48, sensors=4, window=6, n_train=8, n_test=6, replicates=2, max_iters=200)


def small(model="bl", **kw):
    return ExperimentConfig.synthetic(model, **{**SMALL, **kw})


def write_grid(path, lat, lon, values):
    with open(path, "w") as fh:
        fh.write("lat,lon," + ",".join(f"t_{i}" for i in range(values.shape[1])) + "\n")
        for a, b, row in zip(lat, lon, values):
            fh.write(f"{a},{b}," + ",".join("NaN" if np.isnan(v) else repr(float(v)) for v in row) + "\n")


class TestConfig:
    def test_defaults_are_paper_synthetic(self):
        c = ExperimentConfig()
        assert (c.n_nodes, c.sensors, c.window, c.n_train, c.n_test) == (256, 8, 20, 20, 20)
        assert (c.gamma, c.eta, c.mu) == (1e-4, 3.0, 1.0)
        assert c.band == 16 and c.chebyshev_order == 20 and c.replicates == 50
        assert c.sampling_period == pytest.approx(math.pi / 30)

    def test_real_preset(self):
        c = ExperimentConfig.real()
        assert (c.n_nodes, c.knn, c.sensors, c.window, c.n_train, c.n_test) == (100, 5, 10, 5, 5, 55)
        assert (c.gamma, c.eta, c.mu) == (1e-3, 1.0, 1.0)

    @pytest.mark.parametrize(
        "bad", [dict(sensors=0), dict(sensors=300), dict(window=0), dict(scenario="x"), dict(methods=("nope",))]
    )
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            ExperimentConfig(**bad)

    def test_hop_limit_inf_string(self):
        assert math.isinf(ExperimentConfig(hop_limit="inf").hop_limit)
        assert ExperimentConfig(hop_limit="inf").as_dict()["hop_limit"] == "inf"

    def test_mapping(self):
        c = config_from_mapping({"model": "pc", "placement": {"hop_limit": 2}, "learning": {"mu": 0.5}})
        assert c.scenario == "synthetic-pc" and c.hop_limit == 2 and c.mu == 0.5

    def test_unknown_key(self):
        with pytest.raises(KeyError):
            config_from_mapping({"learning": {"rho": 1}})

    def test_yaml(self, tmp_path):
        p = tmp_path / "c.yaml"
        p.write_text("scenario: real\nsensors:\n  count: 7\nplacement:\n  hop_limit: inf\n")
        c = load_config(p)
        assert c.scenario == "real" and c.sensors == 7 and c.n_nodes == 100 and math.isinf(c.hop_limit)


class TestGrid:
    def test_four_point_round_trip(self, tmp_path):
        vals = np.arange(12.0).reshape(4, 3)
        path = tmp_path / "g.csv"
        write_grid(path, [0, 1, 3, 6], [0, 0, 0, 0], vals)
        g, X = ingest_grid_csv(path, 4, 1, seed=0)
        np.testing.assert_array_equal(X, vals)
        assert g.n_nodes == 4

    def test_four_point_knn1_disconnected(self, tmp_path):
        # two far-apart pairs: 1-NN cannot connect them
        path = tmp_path / "g.csv"
        write_grid(path, [0, 0, 50, 50], [0, 1, 0, 1], np.ones((4, 2)))
        with pytest.raises(GraphError):
            ingest_grid_csv(path, 4, 1, seed=0, max_attempts=3)

    def test_missing_excluded(self, tmp_path):
        vals = np.arange(10.0).reshape(5, 2)
        vals[2, 1] = np.nan
        path = tmp_path / "g.csv"
        write_grid(path, [0, 1, 2, 3, 4], [0] * 5, vals)
        g, X = ingest_grid_csv(path, 4, 2, seed=1)
        assert not np.isnan(X).any()
        assert X.shape == (4, 2) and 4.0 not in X[:, 0]
        with pytest.raises(ValueError, match="valid"):
            ingest_grid_csv(path, 5, 2, seed=1)

    def test_deterministic_subset(self, tmp_path):
        r = np.random.default_rng(0)
        path = tmp_path / "g.csv"
        write_grid(path, r.uniform(0, 10, 200), r.uniform(0, 10, 200), r.standard_normal((200, 4)))
        a = ingest_grid_csv(path, 100, 5, seed=3)
        b = ingest_grid_csv(path, 100, 5, seed=3)
        np.testing.assert_array_equal(a[1], b[1])
        assert a[0].dense().tobytes() == b[0].dense().tobytes()

    def test_bad_header(self, tmp_path):
        p = tmp_path / "g.csv"
        p.write_text("x,y,t0\n1,2,3\n")
        with pytest.raises(ValueError, match="lat,lon"):
            read_grid_csv(p)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_grid_csv(tmp_path / "nope.csv")

    def test_synthetic_stand_in(self, tmp_path):
        p = synthetic_sst_grid(tmp_path / "sst.csv", seed=1)
        lat, lon, vals = read_grid_csv(p)
        assert vals.shape[1] == 60
        ok = np.all(np.isfinite(vals), axis=1)
        assert 100 < ok.sum() < lat.size


class TestPipeline:
    def test_perfect_recovery(self):
        cfg = small(noise_variance=0.0, filter_kind="identity", window=3, bandwidth=3, sensors=3)
        scn = make_scenario(cfg)
        from dynplace.graph import spectrum

        U = spectrum(scn.graph).eigenvectors[:, :3]
        rec = run_dynamic(cfg, scenario=scn, dictionary=U)
        assert rec.mse.max() < 1e-20

    def test_zero_signal_noise_floor(self):
        # reconstruction of pure noise: E[MSE] = var * ||A (S^T A)^+||_F^2 / N
        cfg = small(noise_variance=0.5, filter_kind="identity", n_test=400, window=4, n_train=4)
        truth = np.zeros((48, cfg.n_train + cfg.n_test))
        scn = make_scenario(cfg, truth=truth)
        rec = run_static(cfg, "static1", scenario=scn)
        op = SamplingOperator(scn.sensors0)
        R = reconstruct(op, scn.A0, np.eye(cfg.sensors))
        expected = 0.5 * np.sum(R**2) / 48
        assert rec.mse.mean() == pytest.approx(expected, rel=0.15)

    def test_static1_constant_for_constant_signal(self):
        cfg = small()
        truth = np.tile(np.linspace(1, 2, 48)[:, None], (1, cfg.n_train + cfg.n_test))
        rec = run_static(cfg.replace(noise_variance=0.0), "static1", scenario=make_scenario(cfg.replace(noise_variance=0.0), truth=truth))
        np.testing.assert_allclose(rec.mse, rec.mse[0], rtol=1e-12)

    def test_static2_matches_static1_first_step(self):
        cfg = small()
        scn = make_scenario(cfg)
        a = run_static(cfg, "static1", scenario=scn)
        b = run_static(cfg, "static2", scenario=scn)
        assert a.mse[0] == pytest.approx(b.mse[0], rel=1e-9, abs=1e-14)

    def test_unknown_static(self):
        with pytest.raises(ValueError):
            run_static(small(), "static3")

    def test_dynamic_record(self):
        cfg = small("pc")
        rec = run_dynamic(cfg)
        rec.check(cfg.n_test)
        assert len(rec.positions) == cfg.n_test + 1
        assert len(rec.ista_iters) == cfg.n_test
        assert rec.method == "dynamic"
        assert run_dynamic(cfg, hop_limit=math.inf).method == "dynamic-pinf"

    def test_record_check(self):
        rec = RunRecord("dynamic", 0, np.array([0.1, -1.0]), [], [], [], 0.0)
        with pytest.raises(InvariantViolation):
            rec.check(2)
        with pytest.raises(InvariantViolation):
            rec.check(3)

    def test_methods_share_initial_sensors(self):
        res = run_experiment(small(replicates=1))
        starts = {r.method: r.positions[0].tolist() for r in res.records}
        assert len({tuple(v) for v in starts.values()}) == 1

    def test_sweep_k_full_sampling(self):
        cfg = small(noise_variance=0.0, filter_kind="identity", n_nodes=20, window=4, replicates=1)
        rows = sweep_k(cfg, [20])
        assert rows[0][1] < 1e-12

    def test_sweep_single_matches_run(self):
        cfg = small(replicates=2)
        rows = sweep_k(cfg, [4])
        res = run_experiment(cfg.replace(methods=("dynamic",)))
        assert rows == [(4, pytest.approx(res.mse_matrix("dynamic").mean()), pytest.approx(rows[0][2]))]

    def test_sweep_rejects_large_k(self):
        with pytest.raises(ValueError):
            sweep_k(small(), [1000])


class TestOutputs:
    def test_files(self, tmp_path):
        cfg = small(replicates=2)
        write_outputs(run_experiment(cfg), tmp_path)
        lines = (tmp_path / "mse.csv").read_text().splitlines()
        assert lines[0] == "t,method,mean_mse,std_mse"
        assert len(lines) == 1 + 4 * cfg.n_test
        traj = [json.loads(x) for x in (tmp_path / "trajectory.jsonl").read_text().splitlines()]
        first = traj[0]
        assert set(first) >= {"t", "positions", "moves"}
        assert set(first["moves"][0]) == {"sensor", "from", "to", "score"}
        echo = json.loads((tmp_path / "config.echo").read_text())
        assert echo["sensors"] == 4

    def test_trajectory_chains(self, tmp_path):
        rec = run_dynamic(small())
        for t, mv in enumerate(rec.moves):
            assert [m.from_node for m in mv] == rec.positions[t].tolist()
            assert [m.to_node for m in mv] == rec.positions[t + 1].tolist()


class TestDeterminism:
    def test_same_seed_same_records(self):
        a = run_experiment(small(replicates=1))
        b = run_experiment(small(replicates=1))
        for x, y in zip(a.records, b.records):
            assert x.mse.tobytes() == y.mse.tobytes()
            assert all(np.array_equal(p, q) for p, q in zip(x.positions, y.positions))

    def test_processes_match_sequential(self, tmp_path):
        cfg = small(replicates=2, methods=("dynamic", "static1"))
        write_outputs(run_experiment(cfg), tmp_path / "a")
        write_outputs(run_experiment(cfg.replace(jobs=2)), tmp_path / "b")
        for name in ("mse.csv", "trajectory.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
