import csv
import json

import numpy as np
import pytest

from gradeacc import cli
from gradeacc.dynamics import VehicleParams
from gradeacc.ident import chirp_input, simulate_dataset
from gradeacc.metrics import performance_report
from gradeacc.scenarios import ScenarioLog

SHORT = {"scenario": {"duration": 8.0}, "road": {"type": "sine", "amplitude": 0.05}}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def run(tmp_path, *argv, config=None):
    args = list(argv) + ["--out", str(tmp_path / "out")]
    if config is not None:
        args += ["--config", write_config(tmp_path, config)]
    return cli.main(args), tmp_path / "out"


class TestSimulate:
    def test_writes_log_report_and_figure(self, tmp_path):
        code, out = run(tmp_path, "simulate", config=SHORT)
        assert code == 0
        assert (out / "log.csv").exists() and (out / "log.png").stat().st_size > 0
        report = json.loads((out / "report.json").read_text())
        assert set(report["report"]) == {"tracking", "energy", "comfort", "total", "min_gap_m", "min_margin_m", "violations"}

    def test_report_embeds_config_and_seed(self, tmp_path):
        code, out = run(tmp_path, "simulate", "--seed", "42", "--no-plots", config=SHORT)
        report = json.loads((out / "report.json").read_text())
        assert code == 0 and report["seed"] == 42
        assert report["config"]["scenario"]["seed"] == 42
        assert report["config"]["road"]["amplitude"] == 0.05
        assert not (out / "log.png").exists()

    def test_log_round_trip_reproduces_report(self, tmp_path):
        code, out = run(tmp_path, "simulate", "--no-plots", config=SHORT)
        report = json.loads((out / "report.json").read_text())["report"]
        again = performance_report(ScenarioLog.from_csv(out / "log.csv"), 20.0).to_dict()
        assert code == 0 and again == report

    def test_lead_absent_gives_cc_log(self, tmp_path):
        code, out = run(tmp_path, "simulate", "--no-plots", config={**SHORT, "lead_trajectory": {"type": "absent"}})
        log = ScenarioLog.from_csv(out / "log.csv")
        assert code == 0 and np.all(np.isnan(log.gap)) and np.all(np.isnan(log.d_safe))

    def test_safety_violation_exit_code(self, tmp_path):
        cfg = {
            "scenario": {"duration": 5.0, "ego_v0": 25.0},
            "lead_trajectory": {"type": "brake", "speed": 0.0, "brake_time": 0.0, "s0": 8.0, "v0": 0.0},
        }
        code, out = run(tmp_path, "simulate", "--no-plots", config=cfg)
        assert code == 3
        assert json.loads((out / "report.json").read_text())["safety_violation"] is True

    def test_baseline_flag_is_noted(self, tmp_path):
        code, out = run(tmp_path, "simulate", "--no-plots", "--baseline-no-grade", config=SHORT)
        report = json.loads((out / "report.json").read_text())
        assert code == 0 and report["config"]["scenario"]["baseline_no_grade"] is True and report["note"]

    def test_same_seed_same_bytes(self, tmp_path):
        outs = []
        for i in range(2):
            code = cli.main(["simulate", "--no-plots", "--out", str(tmp_path / str(i)), "--config", write_config(tmp_path, SHORT)])
            outs.append((tmp_path / str(i) / "log.csv").read_bytes())
        assert code == 0 and outs[0] == outs[1]


class TestErrors:
    def test_unknown_key(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simulate", config={"mpc": {"horizon": 3}})
        assert code == 2 and "horizon" in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        code = cli.main(["simulate", "--config", str(tmp_path / "none.json"), "--out", str(tmp_path)])
        assert code == 2 and "none.json" in capsys.readouterr().err

    def test_bad_replay_header_is_echoed(self, tmp_path, capsys):
        (tmp_path / "lead.csv").write_text("seconds,speed\n0,10\n")
        cfg = {"lead_trajectory": {"type": "replay", "path": "lead.csv"}}
        code, _ = run(tmp_path, "simulate", config=cfg)
        assert code == 2 and "seconds,speed" in capsys.readouterr().err

    def test_missing_replay_file(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simulate", config={"lead_trajectory": {"type": "replay", "path": "gone.csv"}})
        assert code == 2 and "gone.csv" in capsys.readouterr().err

    def test_braking_beyond_vehicle_limit(self, tmp_path, capsys):
        code, _ = run(tmp_path, "simulate", config={"mpc": {"u_min": -9.0}})
        assert code == 2 and "F_brake_max" in capsys.readouterr().err

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit):
            cli.main(["fly"])


class TestCompare:
    def test_side_by_side_columns(self, tmp_path):
        cfg = {"scenario": {"duration": 10.0}, "road": {"type": "sine", "amplitude": 0.06}}
        code, out = run(tmp_path, "compare", config=cfg)
        assert code == 0
        with (out / "compare.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["index", "with_grade", "without_grade"]
        assert [r[0] for r in rows[1:]] == ["tracking", "energy", "comfort", "total", "min_gap_m", "min_margin_m", "violations"]
        data = json.loads((out / "compare.json").read_text())
        assert data["note"] and data["config"]["scenario"]["duration"] == 10.0
        assert (out / "with_grade.csv").exists() and (out / "without_grade.csv").exists()
        assert (out / "compare.png").stat().st_size > 0


class TestSafeset:
    def test_boundary_csv(self, tmp_path):
        code, out = run(tmp_path, "safeset", config={"lead_trajectory": {"v0": 20.0}})
        assert code == 0
        with (out / "boundary.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["v_e_mps", "d_min_m", "d_fit_m"]
        v, d_min, d_fit = np.array(rows[1:], dtype=float).T
        assert v[0] == 0.0 and np.all(np.diff(v) > 0)
        meta = json.loads((out / "boundary.json").read_text())
        # raw points may sit below l_min for a moving lead; the fitted distance never does
        assert np.all(d_fit >= 5.0)
        assert np.all(d_fit >= d_min - meta["fit_residual_m"] - 1e-9)
        assert len(meta["coeffs"]) == 3 and (out / "boundary.png").exists()


class TestIdentify:
    def test_recovers_synthetic_parameters(self, tmp_path):
        p = VehicleParams()
        trace = simulate_dataset(p, chirp_input(300, 0.5), 0.5, v0=5.0)
        trace.to_csv(tmp_path / "trace.csv")
        config = {"vehicle_ego": {"m": 2000.0, "C_d": 0.35, "C_r": 0.012}}
        code, out = run(tmp_path, "identify", str(tmp_path / "trace.csv"), config=config)
        assert code == 0
        fitted = json.loads((out / "identified.json").read_text())
        assert fitted["params"]["m"] == pytest.approx(p.m, rel=0.01)
        assert fitted["params"]["C_dA_f"] == pytest.approx(p.C_d * p.A_f, rel=0.02)
        assert fitted["params"]["C_r"] == pytest.approx(p.C_r, rel=0.05)
        assert (out / "fit.png").exists()

    def test_bad_trace_header(self, tmp_path, capsys):
        (tmp_path / "trace.csv").write_text("t,u,v\n0,1,2\n")
        code, _ = run(tmp_path, "identify", str(tmp_path / "trace.csv"))
        assert code == 2 and "t,u,v" in capsys.readouterr().err

    def test_constant_input_fails_cleanly(self, tmp_path, capsys):
        p = VehicleParams()
        simulate_dataset(p, np.full(200, 500.0), 0.5, v0=10.0).to_csv(tmp_path / "flat.csv")
        code, _ = run(tmp_path, "identify", str(tmp_path / "flat.csv"), "--no-plots")
        assert code == 2 and "excitation" in capsys.readouterr().err
