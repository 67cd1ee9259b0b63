"""Units, grids and wavefunction containers shared by the rest of the package.

Everything is expressed in a (meV, nm, fs) unit system. Wavefunction
amplitudes are stored as densities, so that a normalized one-particle state
satisfies ``sum(|psi|**2) * dx * dy == 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# CODATA 2018 values, converted to meV / nm / fs.
HBAR_MEV_FS = 658.2119569  # hbar in meV*fs
ELECTRON_MASS = 510998.95e3 / 299.792458**2  # m_e c^2 / c^2 in meV*fs^2/nm^2
COULOMB_MEV_NM = 1439.964548  # e^2 / (4 pi eps0) in meV*nm

GAAS_EFFECTIVE_MASS = 0.067
GAAS_DIELECTRIC_CONST = 12.9

__all__ = [
    "UnitSystem",
    "Grid2D",
    "Symmetry",
    "WaveFn1P",
    "WaveFn2P",
    "make_gaas_units",
    "normalize",
    "norm",
    "inner_product",
    "symmetry_defect",
    "detect_symmetry",
    "antisymmetrize",
    "symmetrize",
]


@dataclass(frozen=True)
class UnitSystem:
    """Physical constants of the host material.

    Attributes
    ----------
    hbar : float
        Reduced Planck constant in meV*fs.
    effective_mass : float
        Carrier mass in units of the free-electron mass.
    dielectric_const : float
        Relative dielectric constant.
    coulomb_scale : float
        ``e**2 / (4 pi eps0 eps_r)`` in meV*nm.
    """

    hbar: float
    effective_mass: float
    dielectric_const: float
    coulomb_scale: float

    def __post_init__(self):
        for name in ("hbar", "effective_mass", "dielectric_const", "coulomb_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        expected = COULOMB_MEV_NM / self.dielectric_const
        if abs(self.coulomb_scale - expected) > 1e-12 * expected:
            raise ValueError(
                f"coulomb_scale {self.coulomb_scale} inconsistent with "
                f"dielectric constant (expected {expected})"
            )

    @classmethod
    def from_material(cls, effective_mass: float, dielectric_const: float,
                      hbar: float = HBAR_MEV_FS) -> "UnitSystem":
        return cls(hbar, effective_mass, dielectric_const,
                   COULOMB_MEV_NM / dielectric_const)

    @property
    def mass(self) -> float:
        """Carrier mass in meV*fs^2/nm^2."""
        return self.effective_mass * ELECTRON_MASS

    @property
    def kinetic_prefactor(self) -> float:
        """``hbar**2 / (2 m)`` in meV*nm^2."""
        return self.hbar**2 / (2.0 * self.mass)

    def wavenumber(self, energy: float) -> float:
        """Wavenumber (1/nm) of a free carrier with kinetic energy ``energy`` (meV)."""
        return math.sqrt(energy / self.kinetic_prefactor)

    def oscillator_length(self, level_spacing: float) -> float:
        """``sqrt(hbar / (m omega))`` in nm for a trap with spacing ``hbar*omega``."""
        return math.sqrt(2.0 * self.kinetic_prefactor / level_spacing)


def make_gaas_units() -> UnitSystem:
    """GaAs conduction-band parameters: m* = 0.067 m_e, eps_r = 12.9.

    Values from the standard room-temperature tables (Adachi, *Properties of
    Gallium Arsenide*, and the Ioffe semiconductor database).
    """
    return UnitSystem.from_material(GAAS_EFFECTIVE_MASS, GAAS_DIELECTRIC_CONST)


def _is_smooth(n: int) -> bool:
    for p in (2, 3, 5):
        while n % p == 0:
            n //= p
    return n == 1


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic 2D grid.

    Sizes must be even, at least 16, and have no prime factor above 5 so the
    spectral propagator stays on fast FFT paths.
    """

    nx: int
    ny: int
    dx: float
    dy: float
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        for n in (self.nx, self.ny):
            if n < 16 or n % 2 or not _is_smooth(n):
                raise ValueError(
                    f"grid size {n} must be an even 5-smooth integer >= 16"
                )
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))

    @classmethod
    def centered(cls, n: int, spacing: float, center=(0.0, 0.0)) -> "Grid2D":
        """Square grid whose middle point sits at ``center``."""
        half = n // 2 * spacing
        return cls(n, n, spacing, spacing, (center[0] - half, center[1] - half))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def x(self) -> np.ndarray:
        return self.origin[0] + self.dx * np.arange(self.nx)

    @property
    def y(self) -> np.ndarray:
        return self.origin[1] + self.dy * np.arange(self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def kx(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.nx, d=self.dx)

    @property
    def ky(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.ny, d=self.dy)

    @property
    def k_max(self) -> float:
        """Largest representable wavenumber magnitude (corner of the FFT box)."""
        return math.hypot(np.pi / self.dx, np.pi / self.dy)

    @property
    def extent(self) -> tuple[float, float]:
        return (self.nx * self.dx, self.ny * self.dy)

    @property
    def center(self) -> tuple[float, float]:
        return (self.origin[0] + self.nx // 2 * self.dx,
                self.origin[1] + self.ny // 2 * self.dy)


class Symmetry(str, Enum):
    NONE = "none"
    SYMMETRIC = "symmetric"
    ANTISYMMETRIC = "antisymmetric"


SYMMETRY_TOL = 1e-10


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.complex128, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class WaveFn1P:
    """One-particle wavefunction sampled on ``grid`` (shape ``(nx, ny)``)."""

    grid: Grid2D
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = _frozen(self.amplitudes)
        if amp.size != self.grid.size:
            raise ValueError(
                f"expected {self.grid.size} amplitudes, got {amp.size}"
            )
        object.__setattr__(self, "amplitudes", amp.reshape(self.grid.shape))

    @property
    def weight(self) -> float:
        return self.grid.cell_area


@dataclass(frozen=True, eq=False)
class WaveFn2P:
    """Two-particle wavefunction Psi(r1, r2), shape ``(nx, ny, nx, ny)``.

    A non-``NONE`` symmetry tag is checked on construction: the exchange defect
    relative to the largest amplitude must be below ``SYMMETRY_TOL``.
    """

    grid: Grid2D
    amplitudes: np.ndarray
    symmetry: Symmetry = Symmetry.NONE

    def __post_init__(self):
        amp = _frozen(self.amplitudes)
        if amp.size != self.grid.size**2:
            raise ValueError(
                f"expected {self.grid.size ** 2} amplitudes, got {amp.size}"
            )
        object.__setattr__(self, "amplitudes", amp.reshape(self.grid.shape * 2))
        object.__setattr__(self, "symmetry", Symmetry(self.symmetry))
        if self.symmetry is not Symmetry.NONE:
            anti, sym = symmetry_defect(self)
            defect = anti if self.symmetry is Symmetry.ANTISYMMETRIC else sym
            if defect > SYMMETRY_TOL:
                raise ValueError(
                    f"state tagged {self.symmetry.value} has exchange defect {defect:.3e}"
                )

    @property
    def weight(self) -> float:
        return self.grid.cell_area**2

    def as_matrix(self) -> np.ndarray:
        """Amplitudes as an ``(M, M)`` matrix over flattened grid indices."""
        m = self.grid.size
        return self.amplitudes.reshape(m, m)

    def with_amplitudes(self, amplitudes, symmetry=None) -> "WaveFn2P":
        return WaveFn2P(self.grid, amplitudes,
                        self.symmetry if symmetry is None else symmetry)


def norm(wf: WaveFn1P | WaveFn2P) -> float:
    return float(np.sqrt(np.vdot(wf.amplitudes, wf.amplitudes).real * wf.weight))


def normalize(wf):
    """Return ``wf`` rescaled to unit L2 norm. Raises on a zero state."""
    n = norm(wf)
    if not n > 0 or not np.isfinite(n):
        raise ValueError("cannot normalize: zero norm")
    if isinstance(wf, WaveFn2P):
        return WaveFn2P(wf.grid, wf.amplitudes / n, wf.symmetry)
    return WaveFn1P(wf.grid, wf.amplitudes / n)


def inner_product(a: WaveFn1P, b: WaveFn1P) -> complex:
    """``<a|b> = sum(conj(a) * b) * dx * dy``."""
    if a.grid != b.grid:
        raise ValueError("grid mismatch")
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.weight)


def symmetry_defect(wf: WaveFn2P) -> tuple[float, float]:
    """Max antisymmetry and symmetry defects relative to the largest amplitude.

    Returns ``(max|Psi + Psi^T|, max|Psi - Psi^T|) / max|Psi|`` over the
    exchange of the two particle coordinates.
    """
    mat = wf.as_matrix()
    scale = np.abs(mat).max()
    if scale == 0:
        return 0.0, 0.0
    return (float(np.abs(mat + mat.T).max() / scale),
            float(np.abs(mat - mat.T).max() / scale))


def detect_symmetry(wf: WaveFn2P, tol: float = SYMMETRY_TOL) -> Symmetry:
    anti, sym = symmetry_defect(wf)
    if anti <= tol:
        return Symmetry.ANTISYMMETRIC
    if sym <= tol:
        return Symmetry.SYMMETRIC
    return Symmetry.NONE


def _exchange_projection(wf: WaveFn2P, sign: int, tag: Symmetry) -> WaveFn2P:
    mat = wf.as_matrix()
    part = 0.5 * (mat + sign * mat.T)
    n = np.sqrt(np.vdot(part, part).real * wf.weight)
    if not n > 1e-14 * np.sqrt(np.vdot(mat, mat).real * wf.weight):
        raise ValueError(f"{tag.value} projection vanishes")
    return WaveFn2P(wf.grid, part / n, tag)


def antisymmetrize(wf: WaveFn2P) -> WaveFn2P:
    """Normalized antisymmetric part of ``wf``."""
    return _exchange_projection(wf, -1, Symmetry.ANTISYMMETRIC)


def symmetrize(wf: WaveFn2P) -> WaveFn2P:
    """Normalized symmetric part of ``wf``."""
    return _exchange_projection(wf, +1, Symmetry.SYMMETRIC)
