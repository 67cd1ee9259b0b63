"""Two-electron scattering in a 2D harmonic trap.

Hamiltonian (both particles see the same trap)::

    H = T_1 + T_2 + V_trap(r_1) + V_trap(r_2) + e^2 / (eps sqrt(|r_1 - r_2|^2 + a^2))

The state is propagated with second-order Strang splitting on a periodic grid,
``exp(-iV dt/2hbar) F^-1 exp(-iT dt/hbar) F exp(-iV dt/2hbar)``. Consecutive
half potential kicks are fused between snapshots.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.fft
from scipy.special import eval_hermite, factorial

from .core import (
    Grid2D,
    Symmetry,
    UnitSystem,
    WaveFn1P,
    WaveFn2P,
    make_gaas_units,
    normalize,
)

__all__ = [
    "Absorber",
    "ScatteringConfig",
    "StabilityError",
    "PotentialField",
    "gaussian_packet",
    "ho_ground_state",
    "ho_eigenstate",
    "build_potential",
    "product_initial",
    "initial_state",
    "SplitOperator",
    "propagate",
    "propagate_1p",
    "energy_expectation",
    "position_expectation",
    "momentum_expectation",
    "write_wavefunction_dump",
    "read_wavefunction_dump",
]

MAX_POTENTIAL_PHASE = 0.1
MAX_KINETIC_PHASE = math.pi


class StabilityError(ValueError):
    """Raised when the time step violates the propagator's accuracy bounds."""


@dataclass(frozen=True)
class Absorber:
    """Multiplicative ``cos^(1/8)`` mask acting within ``margin`` nm of the box edge."""

    margin: float

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError("absorber margin must be positive")

    def mask(self, grid: Grid2D) -> np.ndarray:
        def axis(coords, lo, length):
            depth = np.minimum(coords - lo, lo + length - coords)
            s = np.clip((self.margin - depth) / self.margin, 0.0, 1.0)
            return np.abs(np.cos(0.5 * np.pi * s)) ** 0.125

        mx = axis(grid.x, grid.origin[0], grid.extent[0])
        my = axis(grid.y, grid.origin[1], grid.extent[1])
        return np.outer(mx, my)


def _unit(v) -> tuple[float, float]:
    v = np.asarray(v, dtype=float)
    n = np.hypot(*v)
    if n == 0:
        raise ValueError("propagation direction must be nonzero")
    return (float(v[0] / n), float(v[1] / n))


@dataclass(frozen=True)
class ScatteringConfig:
    """Physical and numerical parameters of a scattering run.

    Lengths in nm, energies in meV, times in fs. ``coulomb_softening=None``
    selects ``max(dx, dy)``.
    """

    units: UnitSystem = field(default_factory=make_gaas_units)
    grid: Grid2D = field(default_factory=lambda: Grid2D.centered(48, 5.0, (95.0, 95.0)))
    trap_center: tuple[float, float] = (95.0, 95.0)
    trap_energy: float = 2.0
    packet_center: tuple[float, float] = (95.0 - 136 / math.sqrt(2), 95.0 - 136 / math.sqrt(2))
    packet_sigma: float = 10.0
    kinetic_energy: float = 10.0
    direction: tuple[float, float] = (1.0, 1.0)
    coulomb_softening: Optional[float] = None
    dt: float = 0.5
    n_steps: int = 960
    snapshot_stride: int = 20
    absorber: Optional[Absorber] = None
    use_trap: bool = True
    use_coulomb: bool = True

    def __post_init__(self):
        object.__setattr__(self, "direction", _unit(self.direction))
        object.__setattr__(self, "trap_center", tuple(map(float, self.trap_center)))
        object.__setattr__(self, "packet_center", tuple(map(float, self.packet_center)))
        if self.coulomb_softening is None:
            object.__setattr__(self, "coulomb_softening", max(self.grid.dx, self.grid.dy))
        if not self.coulomb_softening > 0:
            raise ValueError("coulomb_softening must be positive")
        if not self.trap_energy > 0:
            raise ValueError("trap_energy must be positive")
        if not self.packet_sigma > 0:
            raise ValueError("packet_sigma must be positive")
        if self.kinetic_energy < 0:
            raise ValueError("kinetic_energy must be non-negative")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 0 or self.snapshot_stride < 1:
            raise ValueError("n_steps must be >= 0 and snapshot_stride >= 1")

    def with_launch(self, distance: float) -> "ScatteringConfig":
        """Copy with the packet placed ``distance`` nm upstream of the trap."""
        cx, cy = self.trap_center
        ux, uy = self.direction
        return replace(self, packet_center=(cx - distance * ux, cy - distance * uy))

    @property
    def oscillator_length(self) -> float:
        return self.units.oscillator_length(self.trap_energy)

    @property
    def wavevector(self) -> np.ndarray:
        k = self.units.wavenumber(self.kinetic_energy)
        return k * np.asarray(self.direction)

    @property
    def launch_distance(self) -> float:
        return math.dist(self.packet_center, self.trap_center)

    @property
    def minimum_launch_distance(self) -> float:
        return 4 * self.packet_sigma + 4 * self.oscillator_length

    def check_launch(self) -> None:
        """Initial packets must be far apart: Coulomb energy and overlap negligible."""
        if self.launch_distance < self.minimum_launch_distance:
            raise ValueError(
                f"packet-trap distance {self.launch_distance:.2f} nm is below "
                f"4 sigma + 4 l_ho = {self.minimum_launch_distance:.2f} nm"
            )

    def stability_numbers(self, n_particles: int = 2) -> tuple[float, float]:
        """(max potential phase, max kinetic phase) accumulated in one step."""
        pot = build_potential(self)
        vmax = pot.max_abs(n_particles)
        tmax = n_particles * self.units.kinetic_prefactor * self.grid.k_max**2
        hbar = self.units.hbar
        return self.dt * vmax / hbar, self.dt * tmax / hbar

    def check_stability(self, n_particles: int = 2) -> None:
        vphase, tphase = self.stability_numbers(n_particles)
        if vphase >= MAX_POTENTIAL_PHASE:
            raise StabilityError(
                f"dt*max|V|/hbar = {vphase:.4f} >= {MAX_POTENTIAL_PHASE}; reduce dt"
            )
        if tphase >= MAX_KINETIC_PHASE:
            raise StabilityError(
                f"dt*T_max/hbar = {tphase:.4f} >= pi; reduce dt or coarsen the grid"
            )


def gaussian_packet(cfg: ScatteringConfig) -> WaveFn1P:
    """Minimum-uncertainty packet at ``packet_center`` with carrier wavevector k."""
    g = cfg.grid
    if cfg.packet_sigma < 2 * max(g.dx, g.dy):
        raise ValueError("packet sigma below 2 grid spacings is not resolved")
    x, y = g.mesh()
    cx, cy = cfg.packet_center
    kx, ky = cfg.wavevector
    amp = np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (4 * cfg.packet_sigma**2)
                 + 1j * (kx * x + ky * y))
    return normalize(WaveFn1P(g, amp))


def _hermite_function(n: int, xi: np.ndarray) -> np.ndarray:
    return eval_hermite(n, xi) * np.exp(-0.5 * xi**2) / math.sqrt(2.0**n * factorial(n))


def ho_eigenstate(cfg: ScatteringConfig, n_x: int, n_y: int) -> WaveFn1P:
    """Trap eigenstate ``(n_x, n_y)``; energy ``(n_x + n_y + 1) hbar omega``."""
    g = cfg.grid
    length = cfg.oscillator_length
    for n, d, ext in ((n_x, g.dx, g.extent[0]), (n_y, g.dy, g.extent[1])):
        if n < 0:
            raise ValueError("quantum numbers must be non-negative")
        turning = length * math.sqrt(2 * n + 1)
        if length / math.sqrt(2 * n + 1) < d or length < 2 * d:
            raise ValueError(f"level {n} is under-resolved by spacing {d} nm")
        if turning + 3 * length > ext / 2:
            raise ValueError(f"level {n} does not fit in a {ext} nm box")
    x, y = g.mesh()
    cx, cy = cfg.trap_center
    amp = (_hermite_function(n_x, (x - cx) / length)
           * _hermite_function(n_y, (y - cy) / length))
    return normalize(WaveFn1P(g, amp))


def ho_ground_state(cfg: ScatteringConfig) -> WaveFn1P:
    """Gaussian trap ground state ``exp(-m omega |r - r0|^2 / 2 hbar)``."""
    g = cfg.grid
    length = cfg.oscillator_length
    if length < 2 * max(g.dx, g.dy):
        raise ValueError("oscillator length below 2 grid spacings is not resolved")
    x, y = g.mesh()
    cx, cy = cfg.trap_center
    return normalize(WaveFn1P(g, np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * length**2))))


@dataclass(frozen=True, eq=False)
class PotentialField:
    """One-body trap potential and softened two-body Coulomb term.

    ``two_body[i + nx - 1, j + ny - 1]`` is the interaction at displacement
    ``(i dx, j dy)`` for ``|i| < nx``, ``|j| < ny``.
    """

    grid: Grid2D
    one_body: np.ndarray
    two_body: np.ndarray

    def pair_potential(self) -> np.ndarray:
        """Interaction evaluated on the two-particle grid, shape ``(nx, ny, nx, ny)``."""
        nx, ny = self.grid.shape
        ix = np.arange(nx)[:, None] - np.arange(nx)[None, :] + nx - 1
        iy = np.arange(ny)[:, None] - np.arange(ny)[None, :] + ny - 1
        return self.two_body[ix[:, None, :, None], iy[None, :, None, :]]

    def total(self, n_particles: int = 2) -> np.ndarray:
        if n_particles == 1:
            return self.one_body.copy()
        v = self.pair_potential()
        v += self.one_body[:, :, None, None]
        v += self.one_body[None, None, :, :]
        return v

    def max_abs(self, n_particles: int = 2) -> float:
        if n_particles == 1:
            return float(np.abs(self.one_body).max())
        # upper bound: both trap terms and the interaction at their peaks
        return float(2 * np.abs(self.one_body).max() + np.abs(self.two_body).max())


def build_potential(cfg: ScatteringConfig) -> PotentialField:
    g = cfg.grid
    u = cfg.units
    if cfg.use_trap:
        x, y = g.mesh()
        cx, cy = cfg.trap_center
        # 1/2 m w^2 r^2 == (hbar w / 2) (r / l)^2
        one = 0.5 * cfg.trap_energy * ((x - cx) ** 2 + (y - cy) ** 2) / cfg.oscillator_length**2
    else:
        one = np.zeros(g.shape)
    if cfg.use_coulomb:
        dx = g.dx * np.arange(-(g.nx - 1), g.nx)
        dy = g.dy * np.arange(-(g.ny - 1), g.ny)
        r2 = dx[:, None] ** 2 + dy[None, :] ** 2
        two = u.coulomb_scale / np.sqrt(r2 + cfg.coulomb_softening**2)
    else:
        two = np.zeros((2 * g.nx - 1, 2 * g.ny - 1))
    return PotentialField(g, one, two)


def product_initial(psi: WaveFn1P, phi: WaveFn1P) -> WaveFn2P:
    """Unsymmetrized product ``psi(r1) phi(r2)``, normalized."""
    if psi.grid != phi.grid:
        raise ValueError("grid mismatch")
    amp = psi.amplitudes[:, :, None, None] * phi.amplitudes[None, None, :, :]
    return normalize(WaveFn2P(psi.grid, amp, Symmetry.NONE))


def initial_state(cfg: ScatteringConfig) -> WaveFn2P:
    """Free packet (particle 1) times trap ground state (particle 2)."""
    cfg.check_launch()
    return product_initial(gaussian_packet(cfg), ho_ground_state(cfg))


class SplitOperator:
    """Strang-split spectral propagator for one or two particles on ``cfg.grid``.

    Phase factors are built once; :meth:`evolve` advances an amplitude array
    in place by a number of steps.
    """

    def __init__(self, cfg: ScatteringConfig, n_particles: int = 2, workers: int | None = None):
        if n_particles not in (1, 2):
            raise ValueError("n_particles must be 1 or 2")
        cfg.check_stability(n_particles)
        self.cfg = cfg
        self.n_particles = n_particles
        self.workers = workers
        g = cfg.grid
        hbar = cfg.units.hbar
        pot = build_potential(cfg)
        v = pot.total(n_particles)
        self.potential = v
        self.half_kick = np.exp(-0.5j * cfg.dt / hbar * v)
        self.full_kick = self.half_kick**2
        del v

        kx, ky = np.meshgrid(g.kx, g.ky, indexing="ij")
        t1 = cfg.units.kinetic_prefactor * (kx**2 + ky**2)
        if n_particles == 1:
            self.kinetic = t1
        else:
            self.kinetic = t1[:, :, None, None] + t1[None, None, :, :]
        self.drift = np.exp(-1j * cfg.dt / hbar * self.kinetic)

        if cfg.absorber is not None:
            m = cfg.absorber.mask(g)
            self.mask = m if n_particles == 1 else m[:, :, None, None] * m[None, None, :, :]
        else:
            self.mask = None

    def _drift(self, psi: np.ndarray) -> np.ndarray:
        psi = scipy.fft.fftn(psi, workers=self.workers, overwrite_x=True)
        psi *= self.drift
        return scipy.fft.ifftn(psi, workers=self.workers, overwrite_x=True)

    def evolve(self, psi: np.ndarray, n_steps: int) -> np.ndarray:
        """Advance ``n_steps`` full Strang steps; returns the new array."""
        if n_steps == 0:
            return psi
        psi = psi * self.half_kick
        for step in range(n_steps):
            psi = self._drift(psi)
            psi *= self.half_kick if step == n_steps - 1 else self.full_kick
            if self.mask is not None:
                psi *= self.mask
        return psi


SnapshotCallback = Callable[[float, WaveFn2P], None]


def _run(psi0, cfg, n_particles, on_snapshot, start_time, workers, wrap):
    prop = SplitOperator(cfg, n_particles, workers)
    psi = np.array(psi0, dtype=np.complex128, copy=True)
    t = start_time
    if on_snapshot is not None:
        on_snapshot(t, wrap(psi))
    done = 0
    while done < cfg.n_steps:
        block = min(cfg.snapshot_stride, cfg.n_steps - done)
        psi = prop.evolve(psi, block)
        done += block
        t = start_time + done * cfg.dt
        if on_snapshot is not None and block == cfg.snapshot_stride:
            on_snapshot(t, wrap(psi))
    return psi


def propagate(state: WaveFn2P, cfg: ScatteringConfig,
              on_snapshot: SnapshotCallback | None = None,
              start_time: float = 0.0, workers: int | None = None) -> WaveFn2P:
    """Evolve a two-particle state for ``cfg.n_steps`` steps of ``cfg.dt``.

    ``on_snapshot(t, state)`` is called at ``start_time`` and after every
    ``snapshot_stride`` steps with an immutable copy of the state; ``t`` in fs.
    The exchange-symmetry tag of the input is carried through; the
    Hamiltonian commutes with particle exchange, so the state stays in its
    symmetry sector.
    """
    if state.grid != cfg.grid:
        raise ValueError("state grid differs from config grid")
    tag = state.symmetry

    def wrap(arr):
        return WaveFn2P(cfg.grid, _restore_symmetry(arr, tag), tag)

    psi = _run(state.amplitudes, cfg, 2, on_snapshot, start_time, workers, wrap)
    return wrap(psi)


def _restore_symmetry(arr: np.ndarray, tag: Symmetry) -> np.ndarray:
    # FFT roundoff breaks the exchange symmetry at the 1e-16 level; project it out
    if tag is Symmetry.NONE:
        return arr
    m = int(round(math.sqrt(arr.size)))
    mat = arr.reshape(m, m)
    sign = 1 if tag is Symmetry.SYMMETRIC else -1
    return (0.5 * (mat + sign * mat.T)).reshape(arr.shape)


def propagate_1p(state: WaveFn1P, cfg: ScatteringConfig,
                 on_snapshot: Callable[[float, WaveFn1P], None] | None = None,
                 workers: int | None = None) -> WaveFn1P:
    """Single-particle version of :func:`propagate` (Coulomb term unused)."""
    if state.grid != cfg.grid:
        raise ValueError("state grid differs from config grid")
    psi = _run(state.amplitudes, cfg, 1, on_snapshot, 0.0, workers,
               lambda arr: WaveFn1P(cfg.grid, arr))
    return WaveFn1P(cfg.grid, psi)


def _kinetic_density(amplitudes: np.ndarray, kinetic: np.ndarray) -> float:
    psik = scipy.fft.fftn(amplitudes)
    return float(np.sum(np.abs(psik) ** 2 * kinetic) / np.sum(np.abs(psik) ** 2))


def energy_expectation(state: WaveFn1P | WaveFn2P, cfg: ScatteringConfig) -> float:
    """``<H>`` in meV (kinetic part evaluated spectrally)."""
    n_particles = 2 if isinstance(state, WaveFn2P) else 1
    g = cfg.grid
    kx, ky = np.meshgrid(g.kx, g.ky, indexing="ij")
    t1 = cfg.units.kinetic_prefactor * (kx**2 + ky**2)
    kinetic = t1 if n_particles == 1 else t1[:, :, None, None] + t1[None, None, :, :]
    v = build_potential(cfg).total(n_particles)
    prob = np.abs(state.amplitudes) ** 2
    return _kinetic_density(state.amplitudes, kinetic) + float(np.sum(prob * v) / prob.sum())


def position_expectation(state: WaveFn1P) -> np.ndarray:
    x, y = state.grid.mesh()
    prob = np.abs(state.amplitudes) ** 2
    return np.array([np.sum(prob * x), np.sum(prob * y)]) / prob.sum()


def momentum_expectation(state: WaveFn1P) -> np.ndarray:
    """Mean wavevector ``<k>`` in 1/nm."""
    g = state.grid
    kx, ky = np.meshgrid(g.kx, g.ky, indexing="ij")
    prob = np.abs(np.fft.fftn(state.amplitudes)) ** 2
    return np.array([np.sum(prob * kx), np.sum(prob * ky)]) / prob.sum()


def position_width(state: WaveFn1P) -> np.ndarray:
    """Standard deviation of x and y (nm)."""
    x, y = state.grid.mesh()
    prob = np.abs(state.amplitudes) ** 2
    prob = prob / prob.sum()
    mx, my = np.sum(prob * x), np.sum(prob * y)
    return np.sqrt([np.sum(prob * (x - mx) ** 2), np.sum(prob * (y - my) ** 2)])


# Snapshot dumps: magic, nx, ny (uint32), time (float64), then complex128 data.
_WF_MAGIC = b"WF2P"
_WF_HEADER = struct.Struct("<4sIId")


def write_wavefunction_dump(path, state: WaveFn2P, time_fs: float) -> None:
    g = state.grid
    with open(path, "wb") as fh:
        fh.write(_WF_HEADER.pack(_WF_MAGIC, g.nx, g.ny, float(time_fs)))
        fh.write(np.ascontiguousarray(state.amplitudes, dtype="<c16").tobytes())


def read_wavefunction_dump(path, grid: Grid2D | None = None):
    """Return ``(amplitudes, time_fs)``; amplitudes shaped ``(nx, ny, nx, ny)``."""
    raw = Path(path).read_bytes()
    magic, nx, ny, t = _WF_HEADER.unpack_from(raw)
    if magic != _WF_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if grid is not None and (nx, ny) != grid.shape:
        raise ValueError("dump grid does not match")
    body = np.frombuffer(raw, dtype="<c16", offset=_WF_HEADER.size)
    if body.size != (nx * ny) ** 2:
        raise ValueError("truncated wavefunction dump")
    return body.reshape(nx, ny, nx, ny).astype(np.complex128), t
