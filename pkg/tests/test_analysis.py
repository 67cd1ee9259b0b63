import math
import warnings

import numpy as np
import pytest

from fermient.analysis import (
    EntanglementSeries,
    NotConvergedError,
    NotStationaryWarning,
    SERIES_COLUMNS,
    formation_time,
    ho_projection,
    oscillation_period,
    stationary_value,
    write_projection_csv,
)
from fermient.core import Grid2D, WaveFn1P
from fermient.dynamics import product_initial
from fermient.spin import SpinConfig


def relaxing(t, y0=0.5, y1=0.6, tau=50.0):
    return y1 + (y0 - y1) * np.exp(-t / tau)


def make_series(n=60, dt=10.0):
    s = EntanglementSeries(SpinConfig.SAME_SPIN, 10.0, n_pairs=100)
    for t in np.arange(n) * dt:
        le = relaxing(t)
        s.append(t, le, math.log(2) + 0.2 * (le - 0.5))
    return s


class TestSeries:
    def test_append_validation(self):
        s = EntanglementSeries("opposite", 10.0, 4)
        s.append(0.0, 0.5)
        with pytest.raises(ValueError, match="increasing"):
            s.append(0.0, 0.6)
        with pytest.raises(ValueError, match="linear entropy"):
            s.append(1.0, 0.3)
        with pytest.raises(ValueError, match="von Neumann"):
            s.append(1.0, 0.6, 5.0)
        assert s.spin is SpinConfig.OPPOSITE

    def test_normalized_columns(self):
        s = make_series()
        assert s.le_norm[0] == 0
        assert s.vne_norm[0] == 0
        assert np.all(s.le_norm >= 0)

    def test_csv(self, tmp_path):
        s = make_series(n=3)
        path = tmp_path / "series.csv"
        s.write_csv(path, ["run x"], ["end"])
        lines = path.read_text().splitlines()
        assert lines[0] == "# run x"
        assert lines[1] == ",".join(SERIES_COLUMNS)
        first = lines[2].split(",")
        assert first[0] == "0" and first[1] == "0.5" and first[5] == "same_spin" and first[6] == "10"
        assert lines[-1] == "# end"

    def test_missing_vne_is_blank(self, tmp_path):
        s = EntanglementSeries("triplet", 20.0, 4)
        s.append(0.0, 0.75)
        path = tmp_path / "s.csv"
        s.write_csv(path)
        assert path.read_text().splitlines()[1].split(",")[2] == ""


class TestStationary:
    def test_plateau(self):
        res = stationary_value(make_series())
        assert res.mean == pytest.approx(0.6, abs=1e-3)
        assert res.is_stationary

    def test_warns_on_drift(self):
        y = np.linspace(0.5, 0.9, 20)
        with pytest.warns(NotStationaryWarning):
            res = stationary_value(y)
        assert not res.is_stationary

    def test_too_short(self):
        with pytest.raises(ValueError):
            stationary_value(np.ones(5))


class TestFormationTime:
    def test_exponential_relaxation(self):
        # 1% band around the asymptote is reached at tau * ln 100
        t = np.arange(0, 2000, 1.0)
        y = relaxing(t)
        tf = formation_time(y, times=t, delta=0.01)
        assert tf == pytest.approx(50 * math.log(100), abs=2)

    def test_on_series(self):
        s = make_series(n=100)
        assert formation_time(s) == pytest.approx(50 * math.log(100), abs=10)

    def test_not_converged(self):
        t = np.arange(30.0)
        y = np.where(t < 29, 0.6, 0.9)
        with pytest.raises(NotConvergedError, match="not converged"):
            formation_time(y, times=t)

    def test_constant_series(self):
        t = np.arange(20.0)
        assert formation_time(np.full(20, 0.5), times=t) == 0.0


def test_oscillation_period():
    t = np.linspace(0, 3000, 601)
    assert oscillation_period(t, 30 * np.cos(2 * math.pi * t / 2068)) == pytest.approx(2068, rel=1e-3)
    with pytest.raises(ValueError):
        oscillation_period(t[:10], t[:10])


class TestProjection:
    def setup_method(self):
        self.grid = Grid2D.centered(16, 1.0)
        a = np.zeros(self.grid.shape, dtype=complex)
        b = np.zeros(self.grid.shape, dtype=complex)
        a[2, 3] = b[9, 9] = 1.0
        self.free, self.bound = WaveFn1P(self.grid, a), WaveFn1P(self.grid, b)
        self.state = product_initial(self.free, self.bound)

    def test_population_and_peak(self):
        pm = ho_projection(self.state, self.bound, (0, 0))
        assert pm.population == pytest.approx(1.0, abs=1e-12)
        assert pm.peak_position() == (float(self.grid.x[2]), float(self.grid.y[3]))
        assert ho_projection(self.state, self.free).population == pytest.approx(0, abs=1e-14)

    def test_csv(self, tmp_path):
        pm = ho_projection(self.state, self.bound, (1, 0))
        path = tmp_path / "gamma.csv"
        write_projection_csv(pm, path, ["level 1,0"])
        lines = path.read_text().splitlines()
        assert lines[1] == "x_nm,y_nm,gamma"
        assert len(lines) == 2 + self.grid.size

    def test_grid_mismatch(self):
        other = WaveFn1P(Grid2D.centered(16, 2.0), self.bound.amplitudes)
        with pytest.raises(ValueError, match="grid"):
            ho_projection(self.state, other)
