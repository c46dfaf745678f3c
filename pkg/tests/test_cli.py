import csv

import numpy as np
import pytest

from repsim.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from repsim.config import ConfigError, format_config, parse_text, resolve, sim_config
from repsim.io import DataError, fmt, read_observations
from repsim.sim import RNG_ID, Mode


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(args):
    return main([str(a) for a in args])


class TestConfig:
    def test_comments_and_defaults(self):
        raw = parse_text("# c\n\nq = 0.3\n", ("q", "seed"))
        v = resolve("simulate", raw)
        assert v["q"] == 0.3 and v["horizon"] == 100 and v["bias"] is None

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_text("nope=1\n", ("q",))

    def test_duplicate_and_malformed(self):
        with pytest.raises(ConfigError):
            parse_text("q=1\nq=2\n", ("q",))
        with pytest.raises(ConfigError):
            parse_text("q\n", ("q",))

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="bad value"):
            resolve("simulate", {"horizon": "ten"})

    def test_roundtrip(self):
        v = resolve("simulate", {"bias": "0.5,-0.5", "n_experts": "2", "gauss_theta": "0.1"})
        text = format_config("simulate", v)
        again = resolve("simulate", parse_text(text, tuple(v)))
        assert again == v

    def test_sim_config(self):
        v = resolve("simulate", {"mode": "gaussian", "rho_c": "0.2", "q": "0.5"})
        cfg = sim_config(v)
        assert cfg.mode is Mode.GAUSSIAN and cfg.cov.pairwise_correlation == pytest.approx(0.2)

    def test_fmt(self):
        assert fmt(None) == "" and fmt(float("nan")) == "" and fmt(3) == "3"
        assert fmt(0.1 + 0.2) == "0.3" and fmt(0.1 + 0.2, full=True) == "0.30000000000000004"


class TestMixingCurves:
    def test_default_file(self, tmp_path):
        assert run(["mixing-curves", "--out", tmp_path]) == EXIT_OK
        r = rows(tmp_path / "mixing_curves.csv")
        assert r[0] == ["lambda", "alpha_baseline", "alpha_q", "beta_baseline", "beta_q"]
        body = {row[0]: row for row in r[1:]}
        assert len(r) - 1 == 181
        assert float(body["0.4"][1]) == pytest.approx(0.916667, abs=1e-6)
        assert float(body["0.4"][2]) == pytest.approx(0.958333, abs=1e-6)
        assert body["0.4"][3:] == ["", ""]
        assert body["0.6"][1:3] == ["", ""]
        assert body["0.5"][1:] == ["1", "1", "0", "0"]
        assert (tmp_path / "manifest.txt").exists()

    def test_q_zero(self, tmp_path):
        run(["mixing-curves", "--out", tmp_path, "--set", "q=0"])
        for row in rows(tmp_path / "mixing_curves.csv")[1:]:
            assert row[1] == row[2] and row[3] == row[4]

    def test_bad_grid(self, tmp_path):
        assert run(["mixing-curves", "--out", tmp_path, "--set", "lambda_min=0"]) == EXIT_DATA


class TestHittingTimes:
    def test_table(self, tmp_path, capsys):
        assert run(["hitting-times", "--out", tmp_path]) == EXIT_OK
        out = capsys.readouterr().out
        assert "D_mix=0.328954" in out and "D_truth=0.338919" in out
        r = rows(tmp_path / "hitting_times.csv")
        assert r[0] == ["q", "E_tau"]
        assert [round(float(x[1]), 3) for x in r[1:]] == [0.545, 0.541, 0.537, 0.533, 0.529]

    def test_boundary(self, tmp_path):
        run(["hitting-times", "--out", tmp_path, "--set", "lambda_hit=0.4"])
        assert all(float(x[1]) == 0 for x in rows(tmp_path / "hitting_times.csv")[1:])


SMALL = "q=0.25\nhorizon=40\nn_replications=3\nseed=5\n"


class TestSimulate:
    def test_outputs(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(SMALL)
        assert run(["simulate", "--config", cfg, "--out", tmp_path / "o"]) == EXIT_OK
        traj = rows(tmp_path / "o" / "trajectories.csv")
        assert traj[0][:4] == ["replication", "topic", "t", "lambda"] and traj[0][-1] == "scored"
        assert len(traj) == 1 + 3 * 41
        summary = dict(rows(tmp_path / "o" / "summary.csv")[1:])
        assert "fraction_lambda_T_above_0.95" in summary and "martingale_z" in summary

    def test_per_replication_files(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(SMALL + "trajectory_format=per_replication\n")
        run(["simulate", "--config", cfg, "--out", tmp_path])
        r = rows(tmp_path / "trajectory_r0001_k0.csv")
        assert r[0][:2] == ["t", "lambda"] and len(r) == 42

    def test_gaussian(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(SMALL + "mode=gaussian\n")
        run(["simulate", "--config", cfg, "--out", tmp_path])
        traj = rows(tmp_path / "trajectories.csv")
        assert traj[0][2:5] == ["t", "m", "V"]
        V = np.array([float(x[4]) for x in traj[1:42]])
        assert np.all(np.diff(V) < 0)

    def test_nonidentified_warning_artifact(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("horizon=10\n")
        run(["simulate", "--config", cfg, "--out", tmp_path])
        assert (tmp_path / "identification_warning.txt").exists()
        assert not (tmp_path / "scored_observations.csv").exists()

    def test_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.txt"
        cfg.write_text("horizon=10\nfoo=1\n")
        assert run(["simulate", "--config", cfg, "--out", tmp_path]) == EXIT_DATA
        assert "unknown key 'foo'" in capsys.readouterr().err

    def test_seed_flag(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(SMALL)
        run(["simulate", "--config", cfg, "--out", tmp_path / "a", "--seed", "1"])
        run(["simulate", "--config", cfg, "--out", tmp_path / "b", "--seed", "2"])
        a = (tmp_path / "a" / "trajectories.csv").read_bytes()
        b = (tmp_path / "b" / "trajectories.csv").read_bytes()
        assert a != b
        assert "seed=1\n" in (tmp_path / "a" / "manifest.txt").read_text()


class TestEstimate:
    def test_roundtrip_binary(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text("q=0.25\nhorizon=400\nn_replications=1\ntopics=2\ntrue_state=none\n"
                       "bias=0.5,-0.5,0,0,0,0,0,0,0,0\n")
        run(["simulate", "--config", cfg, "--out", tmp_path / "s"])
        code = run(["estimate", "--data", tmp_path / "s" / "scored_observations.csv",
                    "--mode", "binary", "--out", tmp_path / "e"])
        assert code == EXIT_OK
        r = rows(tmp_path / "e" / "fits.csv")
        assert r[0] == ["expert_id", "intercept", "slope", "se_intercept", "se_slope", "converged"]
        assert len(r) == 11 and all(x[-1] == "1" for x in r[1:])
        assert float(r[1][1]) < 0 < float(r[2][1])  # intercepts carry the opposite sign of b

    def test_gaussian_noiseless_single_expert(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("expert_id,topic_id,t,report,outcome,prior\n"
                        + "".join(f"x,0,{t},{t}.5,{t},\n" for t in range(1, 5)))
        run(["estimate", "--data", data, "--mode", "gaussian", "--out", tmp_path])
        r = rows(tmp_path / "fits.csv")
        assert r[0][1:3] == ["b_hat", "p_hat"]
        assert float(r[1][1]) == 0.5 and r[1][-1] == "0"

    def test_nonconvergent_flagged(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        data.write_text("expert_id,topic_id,t,forecast,outcome,prior\n"
                        + "".join(f"x,0,{t},0.5,{t % 2},0.5\n" for t in range(20)))
        assert run(["estimate", "--data", data, "--mode", "binary", "--out", tmp_path]) == EXIT_OK
        r = rows(tmp_path / "fits.csv")
        assert r[1] == ["x", "", "", "", "", "0"]
        assert "not identified" in capsys.readouterr().err

    def test_empty_file(self, tmp_path, capsys):
        data = tmp_path / "d.csv"
        data.write_text("")
        assert run(["estimate", "--data", data, "--mode", "binary", "--out", tmp_path]) == EXIT_DATA
        assert "empty" in capsys.readouterr().err

    def test_row_number_in_error(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("expert_id,topic_id,t,forecast,outcome,prior\nx,0,1,0.5,1,0.5\nx,0,2,1.5,1,0.5\n")
        with pytest.raises(DataError, match=":3:"):
            read_observations(data)

    def test_mode_mismatch(self, tmp_path):
        data = tmp_path / "d.csv"
        data.write_text("expert_id,topic_id,t,forecast,outcome,prior\nx,0,1,0.5,1,0.5\n")
        assert run(["estimate", "--data", data, "--mode", "gaussian", "--out", tmp_path]) == EXIT_DATA

    def test_missing_data(self, tmp_path):
        assert run(["estimate", "--out", tmp_path]) == EXIT_DATA


class TestUsage:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["--version"])
        assert e.value.code == 0 and RNG_ID in capsys.readouterr().out

    def test_usage_errors_exit_one(self):
        for argv in ([], ["bogus"], ["simulate", "--nope"]):
            with pytest.raises(SystemExit) as e:
                main(argv)
            assert e.value.code == EXIT_USAGE

    def test_manifest_reproduces(self, tmp_path):
        cfg = tmp_path / "c.txt"
        cfg.write_text(SMALL + "topics=2\n")
        run(["simulate", "--config", cfg, "--out", tmp_path / "a"])
        run(["simulate", "--config", tmp_path / "a" / "manifest.txt", "--out", tmp_path / "b"])
        for name in ("trajectories.csv", "summary.csv", "scored_observations.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
