import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradeacc.grade import (
    GradeProfile,
    InputError,
    from_elevation,
    grade_at,
    load_elevation_csv,
    load_grade_csv,
    preview_over_horizon,
    synthetic_sine,
    write_grade_csv,
)


class TestProfile:
    def test_rejects_unsorted(self):
        with pytest.raises(InputError):
            GradeProfile(np.array([0.0, 2.0, 1.0]), np.zeros(3))

    def test_rejects_single_sample(self):
        with pytest.raises(InputError):
            GradeProfile(np.array([0.0]), np.zeros(1))

    def test_rejects_vertical_grade(self):
        with pytest.raises(InputError):
            GradeProfile(np.array([0.0, 1.0]), np.array([0.0, math.pi / 2]))

    def test_is_immutable(self):
        p = GradeProfile(np.array([0.0, 1.0]), np.zeros(2))
        with pytest.raises(ValueError):
            p.grades[0] = 1.0

    def test_extent(self):
        assert GradeProfile(np.array([3.0, 9.0]), np.zeros(2)).extent == (3.0, 9.0)


class TestGradeAt:
    def test_flat(self):
        assert grade_at(GradeProfile.flat(), 123.4) == 0.0

    def test_midpoint(self):
        p = GradeProfile(np.array([0.0, 100.0]), np.array([0.0, 0.1]))
        assert grade_at(p, 50.0) == pytest.approx(0.05)

    def test_clamps_to_end_values(self):
        p = GradeProfile(np.array([0.0, 100.0]), np.array([0.02, 0.1]))
        assert grade_at(p, -10.0) == 0.02
        assert grade_at(p, 1e6) == 0.1

    def test_array_input(self):
        p = GradeProfile(np.array([0.0, 100.0]), np.array([0.0, 0.1]))
        assert grade_at(p, np.array([0.0, 25.0])) == pytest.approx([0.0, 0.025])

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-50, 1100))
    def test_scalar_path_matches_numpy(self, s):
        p = synthetic_sine(0.05, 400, 1000, 7)
        assert p.scalar(s) == pytest.approx(grade_at(p, s), abs=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 1000))
    def test_continuous(self, s):
        # Lipschitz bound from the largest sample-to-sample slope
        p = synthetic_sine(0.05, 400, 1000, 7)
        lip = np.max(np.abs(np.diff(p.grades) / np.diff(p.positions)))
        eps = 1e-6
        assert abs(grade_at(p, s + eps) - grade_at(p, s)) <= lip * eps * (1 + 1e-9)


class TestFromElevation:
    def test_flat(self):
        p = from_elevation([(0, 5), (10, 5), (20, 5), (30, 5)])
        assert np.all(p.grades == 0)

    def test_ramp(self):
        s = np.arange(0.0, 1000.0, 10.0)
        p = from_elevation(np.column_stack([s, 0.01 * s]))
        assert p.grades[1:-1] == pytest.approx(np.full(s.size - 2, math.atan(0.01)), abs=1e-12)
        assert p.grades[5] == pytest.approx(0.0099997, abs=1e-7)

    def test_three_points(self):
        p = from_elevation([(0, 0), (100, 1), (200, 2)])
        assert grade_at(p, 100.0) == pytest.approx(math.atan(2 / 200))

    def test_one_sided_ends(self):
        p = from_elevation([(0, 0), (10, 1), (20, 1), (30, 3)])
        assert p.grades[0] == pytest.approx(math.atan(0.1))
        assert p.grades[-1] == pytest.approx(math.atan(0.2))
        assert p.grades[1] == pytest.approx(math.atan(1 / 20))

    def test_moving_average(self):
        s = np.arange(5.0) * 10
        z = np.array([0.0, 0.0, 1.0, 1.0, 1.0])
        raw = from_elevation(np.column_stack([s, z])).grades
        smooth = from_elevation(np.column_stack([s, z]), smoothing_window=3).grades
        assert smooth[2] == pytest.approx(raw[1:4].mean())
        assert smooth[0] == pytest.approx(raw[0:2].mean())

    @pytest.mark.parametrize(
        "samples, window",
        [
            ([(0, 0), (0, 1), (10, 2)], 1),
            ([(0, 0), (20, 1), (10, 2)], 1),
            ([(0, 0), (10, 1)], 1),
            ([(0, 0), (10, 1), (20, 2)], 5),
            ([(0, 0), (10, 1), (20, 2)], 2),
        ],
    )
    def test_bad_input(self, samples, window):
        with pytest.raises(InputError):
            from_elevation(samples, window)

    @settings(max_examples=50, deadline=None)
    @given(
        st.floats(-0.2, 0.2),
        st.floats(-100, 100),
        st.integers(5, 40),
        st.sampled_from([1, 3, 5]),
    )
    def test_linear_elevation_gives_constant_grade(self, slope, z0, n, window):
        s = np.sort(np.random.default_rng(n).uniform(0, 1000, n))
        s = np.unique(s)
        if s.size < max(3, window):
            return
        p = from_elevation(np.column_stack([s, z0 + slope * s]), window)
        assert np.allclose(p.grades, math.atan(slope), atol=1e-12)


class TestPreview:
    def test_stationary(self):
        p = synthetic_sine(0.05, 400, 1000, 5)
        out = preview_over_horizon(p, 130.0, 0.0, 4, 0.2)
        assert np.all(out == grade_at(p, 130.0)) and out.size == 5

    def test_linear_grade(self):
        s = np.linspace(0, 100, 11)
        p = GradeProfile(s, 0.001 * s)
        out = preview_over_horizon(p, 0.0, 10.0, 5, 0.2)
        assert out == pytest.approx([0, 0.002, 0.004, 0.006, 0.008, 0.010])

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            preview_over_horizon(GradeProfile.flat(), 0, 1, 0, 0.2)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 900), st.floats(0, 30), st.integers(1, 50), st.floats(0.05, 1.0))
    def test_matches_pointwise_lookup(self, s0, v0, n, dt):
        p = synthetic_sine(0.07, 300, 1000, 10)
        out = preview_over_horizon(p, s0, v0, n, dt)
        assert out.size == n + 1
        expected = [grade_at(p, s0 + k * v0 * dt) for k in range(n + 1)]
        assert out == pytest.approx(expected, abs=1e-15)


class TestSyntheticSine:
    def test_zero_amplitude_is_flat(self):
        assert np.all(synthetic_sine(0.0, 400, 1000, 5).grades == 0)

    def test_quarter_wavelength_peak(self):
        p = synthetic_sine(0.05, 400, 1000, 5)
        assert grade_at(p, 100.0) == pytest.approx(0.05)

    def test_covers_length(self):
        p = synthetic_sine(0.05, 400, 1003, 5)
        assert p.extent == (0.0, 1003.0)

    def test_rejects_bad_args(self):
        with pytest.raises(ValueError):
            synthetic_sine(0.05, 0.0, 1000, 5)


class TestCsv:
    def test_grade_round_trip(self, tmp_path):
        p = synthetic_sine(0.05, 400, 200, 10)
        write_grade_csv(p, tmp_path / "g.csv")
        q = load_grade_csv(tmp_path / "g.csv")
        assert np.array_equal(p.positions, q.positions) and np.array_equal(p.grades, q.grades)

    def test_elevation_csv(self, tmp_path):
        f = tmp_path / "e.csv"
        f.write_text("position_m,elevation_m\n0,0\n100,1\n200,2\n")
        assert grade_at(load_elevation_csv(f), 100.0) == pytest.approx(math.atan(0.01))

    def test_bad_header(self, tmp_path):
        f = tmp_path / "e.csv"
        f.write_text("s,z\n0,0\n100,1\n200,2\n")
        with pytest.raises(InputError, match="expected header"):
            load_elevation_csv(f)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_grade_csv(tmp_path / "nope.csv")
