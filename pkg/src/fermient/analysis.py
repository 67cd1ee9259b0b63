"""Observables derived from propagated states and entanglement time series."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import Grid2D, WaveFn1P, WaveFn2P
from .entanglement import normalized_le, normalized_vne
from .spin import SpinConfig

__all__ = [
    "SeriesRecord",
    "EntanglementSeries",
    "ProjectionMap",
    "ho_projection",
    "StationaryResult",
    "stationary_value",
    "formation_time",
    "NotConvergedError",
    "NotStationaryWarning",
    "SERIES_COLUMNS",
    "write_projection_csv",
    "oscillation_period",
]

SERIES_COLUMNS = ("t_fs", "le", "vne", "le_norm", "vne_norm", "spin", "ek_mev")


class NotConvergedError(RuntimeError):
    pass


class NotStationaryWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SeriesRecord:
    t: float
    le: float
    vne: Optional[float] = None


@dataclass
class EntanglementSeries:
    """Time-ordered entanglement records of one run and spin configuration.

    ``n_pairs`` is the number of Slater pairs of the mode space; it fixes the
    normalization of both measures.
    """

    spin: SpinConfig
    kinetic_energy: float
    n_pairs: int
    records: list[SeriesRecord] = field(default_factory=list)

    def __post_init__(self):
        self.spin = SpinConfig(self.spin)

    def append(self, t: float, le: float, vne: float | None = None) -> None:
        if self.records and not t > self.records[-1].t:
            raise ValueError("record times must be strictly increasing")
        if not 0.5 - 1e-9 <= le < 1.0:
            raise ValueError(f"linear entropy {le} outside [1/2, 1)")
        if vne is not None and not np.log(2) - 1e-9 <= vne < np.log(2 * self.n_pairs):
            raise ValueError(f"von Neumann entropy {vne} outside [ln 2, ln dim)")
        self.records.append(SeriesRecord(float(t), float(le), None if vne is None else float(vne)))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def le(self) -> np.ndarray:
        return np.array([r.le for r in self.records])

    @property
    def vne(self) -> np.ndarray:
        return np.array([np.nan if r.vne is None else r.vne for r in self.records])

    @property
    def le_norm(self) -> np.ndarray:
        return np.array([normalized_le(v, self.n_pairs) for v in self.le])

    @property
    def vne_norm(self) -> np.ndarray:
        return np.array([np.nan if r.vne is None else normalized_vne(r.vne, self.n_pairs)
                         for r in self.records])

    def measure(self, name: str) -> np.ndarray:
        if name not in ("le", "vne", "le_norm", "vne_norm"):
            raise ValueError(f"unknown measure {name!r}")
        return getattr(self, name)

    def rows(self):
        for r, ln, vn in zip(self.records, self.le_norm, self.vne_norm):
            yield (r.t, r.le, r.vne, ln, None if np.isnan(vn) else vn,
                   self.spin.value, self.kinetic_energy)

    def write_csv(self, path, header_lines: Sequence[str] = (), footer_lines: Sequence[str] = ()) -> None:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, str):
                return v
            return f"{v:.12g}"

        with open(path, "w", newline="\n") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            fh.write(",".join(SERIES_COLUMNS) + "\n")
            for row in self.rows():
                fh.write(",".join(fmt(v) for v in row) + "\n")
            for line in footer_lines:
                fh.write(f"# {line}\n")


@dataclass(frozen=True, eq=False)
class ProjectionMap:
    """``gamma_n(r)``: square modulus of the projection on trap level ``n``."""

    n_index: tuple[int, int]
    grid: Grid2D
    values: np.ndarray

    @property
    def population(self) -> float:
        return float(self.values.sum() * self.grid.cell_area)

    def peak_position(self) -> tuple[float, float]:
        i, j = np.unravel_index(np.argmax(self.values), self.values.shape)
        return (float(self.grid.x[i]), float(self.grid.y[j]))


def ho_projection(state: WaveFn2P, level: WaveFn1P, n_index=(0, 0)) -> ProjectionMap:
    """``gamma(r) = |sum_r' xi(r') Psi(r, r') dA|^2`` on the grid of ``state``."""
    if state.grid != level.grid:
        raise ValueError("grid mismatch")
    g = state.grid
    amp = state.as_matrix() @ level.amplitudes.reshape(-1) * g.cell_area
    return ProjectionMap(tuple(n_index), g, (np.abs(amp) ** 2).reshape(g.shape))


@dataclass(frozen=True)
class StationaryResult:
    mean: float
    std: float

    @property
    def is_stationary(self) -> bool:
        return self.std <= 0.02 * abs(self.mean)


def _values(series, measure: str) -> np.ndarray:
    if isinstance(series, EntanglementSeries):
        return series.measure(measure)
    return np.asarray(series, dtype=float)


def stationary_value(series, tail_fraction: float = 0.2, measure: str = "le") -> StationaryResult:
    """Mean and standard deviation of the trailing ``tail_fraction`` of a series.

    Warns with :class:`NotStationaryWarning` if the tail spread exceeds 2% of
    its mean.
    """
    y = _values(series, measure)
    if len(y) < 10:
        raise ValueError("need at least 10 records")
    if not 0 < tail_fraction <= 0.5:
        raise ValueError("tail_fraction must be in (0, 0.5]")
    n_tail = max(2, int(round(tail_fraction * len(y))))
    tail = y[-n_tail:]
    res = StationaryResult(float(tail.mean()), float(tail.std()))
    if not res.is_stationary:
        warnings.warn(f"series not stationary: tail std {res.std:.3g} vs mean {res.mean:.3g}",
                      NotStationaryWarning, stacklevel=2)
    return res


def formation_time(series, delta: float = 0.01, tail_fraction: float = 0.2,
                   measure: str = "le", times: Sequence[float] | None = None) -> float:
    """Earliest time after which the series stays within a band of its plateau.

    The band half-width is ``delta * (plateau - initial)``. ``series`` is an
    :class:`EntanglementSeries` or a value array together with ``times``.
    """
    if not 0 < delta <= 0.1:
        raise ValueError("delta must be in (0, 0.1]")
    y = _values(series, measure)
    t = series.times if isinstance(series, EntanglementSeries) else np.asarray(times, dtype=float)
    if t is None or len(t) != len(y):
        raise ValueError("times and values must have the same length")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NotStationaryWarning)
        plateau = stationary_value(y, tail_fraction).mean
    band = delta * abs(plateau - y[0])
    outside = np.abs(y - plateau) > band
    if outside[-1]:
        raise NotConvergedError("series does not settle within the band: not converged")
    hits = np.flatnonzero(outside)
    return float(t[0] if hits.size == 0 else t[hits[-1] + 1])


def write_projection_csv(pm: ProjectionMap, path, header_lines: Sequence[str] = ()) -> None:
    x, y = pm.grid.mesh()
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("x_nm,y_nm,gamma\n")
        for xi, yi, v in zip(x.ravel(), y.ravel(), pm.values.ravel()):
            fh.write(f"{xi:.12g},{yi:.12g},{v:.12g}\n")


def oscillation_period(times, values) -> float:
    """Period of an oscillating signal from its mid-level crossings.

    Crossings are located by linear interpolation; consecutive crossings are
    half a period apart.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    y = y - 0.5 * (y.max() + y.min())
    idx = np.flatnonzero(np.signbit(y[:-1]) != np.signbit(y[1:]))
    if idx.size < 2:
        raise ValueError("need at least two mid-level crossings")
    cross = t[idx] - y[idx] * (t[idx + 1] - t[idx]) / (y[idx + 1] - y[idx])
    return float(2 * np.mean(np.diff(cross)))
