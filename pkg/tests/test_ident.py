from dataclasses import replace

import numpy as np
import pytest

from gradeacc.dynamics import VehicleParams, VehicleState, aero_drag, rolling_resistance, step_euler
from gradeacc.grade import InputError
from gradeacc.ident import IdentificationError, Trace, chirp_input, fit_parameters, simulate_dataset, simulate_speed

P_TRUE = VehicleParams()
P_INIT = replace(P_TRUE, m=2000.0, C_d=0.35, C_r=0.012)
DT = 0.5


def rel_errors(p):
    return (
        abs(p.m / P_TRUE.m - 1),
        abs(p.C_d * p.A_f / (P_TRUE.C_d * P_TRUE.A_f) - 1),
        abs(p.C_r / P_TRUE.C_r - 1),
    )


class TestSimulateDataset:
    def test_force_balance_gives_constant_speed(self):
        v0 = 18.0
        u = aero_drag(v0, P_TRUE) + rolling_resistance(0.0, v0, P_TRUE)
        tr = simulate_dataset(P_TRUE, np.full(100, u), DT, v0=v0)
        assert np.allclose(tr.v, v0, atol=1e-9)

    def test_matches_euler_steps(self):
        u = chirp_input(20, DT)
        tr = simulate_dataset(P_TRUE, u, DT, v0=5.0)
        x = VehicleState(0.0, 5.0)
        for k in range(u.size):
            assert tr.v[k] == pytest.approx(x.v, abs=1e-12)
            x = step_euler(x, u[k], 0.0, DT, P_TRUE)
        assert tr.t == pytest.approx(np.arange(u.size) * DT)

    def test_batch_simulator_agrees(self):
        u = chirp_input(60, DT)
        assert simulate_speed(P_TRUE, u, 5.0, DT) == pytest.approx(simulate_dataset(P_TRUE, u, DT, v0=5.0).v, abs=1e-9)

    def test_seeded_noise_is_reproducible(self):
        u = chirp_input(60, DT)
        a = simulate_dataset(P_TRUE, u, DT, 0.05, v0=5.0, seed=4)
        b = simulate_dataset(P_TRUE, u, DT, 0.05, v0=5.0, seed=4)
        c = simulate_dataset(P_TRUE, u, DT, 0.05, v0=5.0, seed=5)
        assert np.array_equal(a.v, b.v) and not np.array_equal(a.v, c.v)

    @pytest.mark.parametrize("kw", [{"u_trace": []}, {"dt": 0.0}, {"noise_std": -1.0}])
    def test_rejects(self, kw):
        args = {"p_true": P_TRUE, "u_trace": [1.0, 2.0], "dt": DT, **kw}
        with pytest.raises(ValueError):
            simulate_dataset(**args)


class TestFit:
    def test_noiseless_recovery(self):
        tr = simulate_dataset(P_TRUE, chirp_input(600, DT), DT, v0=5.0)
        fit = fit_parameters(tr, DT, P_INIT)
        m_err, cda_err, cr_err = rel_errors(fit.params)
        assert m_err < 0.01 and cda_err < 0.02 and cr_err < 0.05
        assert fit.converged and fit.residual < 1e-3

    def test_starting_at_truth(self):
        tr = simulate_dataset(P_TRUE, chirp_input(300, DT), DT, 0.02, v0=5.0, seed=1)
        fit = fit_parameters(tr, DT, P_TRUE)
        assert fit.iterations <= 2
        # the output-error residual at the optimum sits at the noise level
        assert fit.residual == pytest.approx(0.02, rel=0.15)

    def test_constant_input_is_not_identifiable(self):
        v0 = 15.0
        u = aero_drag(v0, P_TRUE) + rolling_resistance(0.0, v0, P_TRUE)
        tr = simulate_dataset(P_TRUE, np.full(200, u), DT, v0=v0)
        with pytest.raises(IdentificationError, match="excitation"):
            fit_parameters(tr, DT, P_INIT)

    def test_residual_history_non_increasing(self):
        tr = simulate_dataset(P_TRUE, chirp_input(300, DT), DT, 0.05, v0=5.0, seed=2)
        fit = fit_parameters(tr, DT, P_INIT)
        assert np.all(np.diff(fit.history) <= 0)

    def test_noiseless_recovery_at_two_lengths(self):
        for duration in (150, 600):
            tr = simulate_dataset(P_TRUE, chirp_input(duration, DT), DT, v0=5.0)
            assert max(rel_errors(fit_parameters(tr, DT, P_INIT).params)) < 1e-6

    def test_noisy_error_shrinks_with_trace_length(self):
        # repeating one sweep adds data without changing the excitation
        base = chirp_input(150, DT)
        mean_err = []
        for reps in (1, 8):
            errs = []
            for seed in range(5):
                tr = simulate_dataset(P_TRUE, np.tile(base, reps), DT, 0.05, v0=5.0, seed=seed)
                errs.append(max(rel_errors(fit_parameters(tr, DT, P_INIT).params)))
            mean_err.append(np.mean(errs))
        assert mean_err[1] < mean_err[0]

    def test_multiple_traces(self):
        traces = [simulate_dataset(P_TRUE, chirp_input(300, DT, mean=m), DT, v0=5.0) for m in (600.0, 1000.0)]
        params, residual = fit_parameters(traces, DT, P_INIT)
        assert max(rel_errors(params)) < 0.05 and residual < 1e-3

    def test_reports_drag_area_split_by_frontal_area(self):
        tr = simulate_dataset(P_TRUE, chirp_input(300, DT), DT, v0=5.0)
        fit = fit_parameters(tr, DT, P_INIT)
        assert fit.params.A_f == P_INIT.A_f
        assert fit.drag_area == pytest.approx(fit.params.C_d * P_INIT.A_f)

    def test_iteration_limit_warns(self):
        tr = simulate_dataset(P_TRUE, chirp_input(300, DT), DT, 0.05, v0=5.0, seed=3)
        with pytest.warns(RuntimeWarning):
            fit = fit_parameters(tr, DT, P_INIT, max_iter=1, ftol=0.0)
        assert not fit.converged


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        tr = simulate_dataset(P_TRUE, chirp_input(30, DT), DT, 0.05, v0=5.0, seed=7)
        tr.to_csv(tmp_path / "t.csv")
        back = Trace.from_csv(tmp_path / "t.csv")
        assert np.array_equal(back.t, tr.t) and np.array_equal(back.u, tr.u) and np.array_equal(back.v, tr.v)

    def test_bad_header_is_echoed(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("time,force,speed\n0,1,2\n")
        with pytest.raises(InputError, match="time,force,speed"):
            Trace.from_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.csv"):
            Trace.from_csv(tmp_path / "nope.csv")

    def test_too_short(self):
        with pytest.raises(ValueError):
            Trace(np.zeros(1), np.zeros(1), np.zeros(1))
