"""Entanglement of pure two-fermion states.

A two-fermion pure state ``sum_ij w_ij a_i^+ a_j^+ |0>`` is fully described by
its complex antisymmetric coefficient matrix ``Omega``. The one-particle
reduced density matrix is ``rho = Omega Omega^+ / Tr(Omega Omega^+)`` (with the
index convention ``rho_mn = <a_n^+ a_m> / <N>``), and its eigenvalues come in
degenerate pairs ``|z_k|^2``.

The linear entropy ``1 - Tr rho^2`` is evaluated from a single Gram product of
``Omega`` and never diagonalizes anything; the von Neumann and Tsallis
entropies need the spectrum.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "OmegaMatrix",
    "DensityMatrix1P",
    "SchmidtSpectrum",
    "check_omega",
    "reduced_density",
    "linear_entropy",
    "purity_from_gram",
    "von_neumann_entropy",
    "tsallis_entropy",
    "eigen_pairs",
    "slater_rank_estimate",
    "normalized_le",
    "normalized_vne",
    "le_from_spectrum",
    "vne_from_spectrum",
    "write_matrix_dump",
    "read_matrix_dump",
]

OMEGA_ANTISYMMETRY_TOL = 1e-10
INPUT_ANTISYMMETRY_TOL = 1e-8
PAIRING_TOL = 1e-6
RANGE_SLACK = 1e-9


def _antisymmetry_defect(mat: np.ndarray) -> float:
    scale = np.abs(mat).max()
    if scale == 0:
        return 0.0
    return float(np.abs(mat + mat.T).max() / scale)


@dataclass(frozen=True, eq=False)
class OmegaMatrix:
    """Antisymmetric coefficient matrix of a pure two-fermion state.

    The overall scale is free: every measure renormalizes ``rho`` to unit
    trace, so ``Omega`` and ``c * Omega`` describe the same state.
    """

    entries: np.ndarray

    def __post_init__(self):
        mat = np.array(self.entries, dtype=np.complex128, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"Omega must be square, got shape {mat.shape}")
        if not np.isfinite(mat).all():
            raise ValueError("Omega has non-finite entries")
        if not np.any(mat):
            raise ValueError("Omega is zero")
        defect = _antisymmetry_defect(mat)
        if defect > OMEGA_ANTISYMMETRY_TOL:
            raise ValueError(f"Omega is not antisymmetric (defect {defect:.3e})")
        mat.flags.writeable = False
        object.__setattr__(self, "entries", mat)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.entries))


def check_omega(omega, tol: float = INPUT_ANTISYMMETRY_TOL) -> np.ndarray:
    """Validate an Omega matrix (or :class:`OmegaMatrix`) and return its array."""
    if isinstance(omega, OmegaMatrix):
        return omega.entries
    mat = np.asarray(omega, dtype=np.complex128)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"Omega must be square, got shape {mat.shape}")
    if not np.any(mat):
        raise ValueError("Omega is zero")
    defect = _antisymmetry_defect(mat)
    if defect > tol:
        raise ValueError(f"Omega is not antisymmetric (defect {defect:.3e})")
    return mat


@dataclass(frozen=True, eq=False)
class DensityMatrix1P:
    """Unit-trace Hermitian one-particle reduced density matrix.

    Construction checks hermiticity and trace. Positivity and eigenvalue
    pairing need a spectrum and are checked by :func:`eigen_pairs`.
    """

    entries: np.ndarray

    def __post_init__(self):
        mat = np.array(self.entries, dtype=np.complex128, copy=True)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"density matrix must be square, got {mat.shape}")
        herm = np.abs(mat - mat.conj().T).max()
        if herm > 1e-12:
            raise ValueError(f"density matrix not Hermitian (defect {herm:.3e})")
        tr = np.trace(mat)
        if abs(tr - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace {tr} != 1")
        mat.flags.writeable = False
        object.__setattr__(self, "entries", mat)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues in descending order."""
        return np.linalg.eigvalsh(self.entries)[::-1]


@dataclass(frozen=True)
class SchmidtSpectrum:
    """Pair weights ``|z_k|^2`` sorted descending, with ``sum 2|z_k|^2 == 1``."""

    pair_weights: np.ndarray
    pairing_defect: float = 0.0

    @property
    def n_pairs(self) -> int:
        return len(self.pair_weights)


def reduced_density(omega) -> DensityMatrix1P:
    """One-particle reduced density matrix of the state described by ``omega``."""
    mat = check_omega(omega)
    gram = mat @ mat.conj().T
    gram = 0.5 * (gram + gram.conj().T)
    tr = np.trace(gram).real
    return DensityMatrix1P(gram / tr)


def purity_from_gram(gram: np.ndarray) -> float:
    """``Tr(G^2) / Tr(G)^2`` for a Hermitian positive Gram matrix ``G``."""
    tr = np.trace(gram).real
    # Tr(G^2) == ||G||_F^2 for Hermitian G
    return float(np.vdot(gram, gram).real / tr**2)


def linear_entropy(omega) -> float:
    """Linear entropy ``1 - Tr rho^2`` computed directly from ``Omega``.

    Uses one Gram product ``Omega^+ Omega``; no eigendecomposition. The
    result lies in ``[1/2, 1 - 1/dim]`` for any valid two-fermion state.
    """
    mat = check_omega(omega)
    return 1.0 - purity_from_gram(mat.conj().T @ mat)


def _as_density(rho) -> np.ndarray:
    if isinstance(rho, DensityMatrix1P):
        return rho.entries
    return DensityMatrix1P(rho).entries


def _spectrum(rho) -> np.ndarray:
    lam = np.linalg.eigvalsh(_as_density(rho))
    if lam.min() < -1e-10:
        raise ValueError(f"density matrix has negative eigenvalue {lam.min():.3e}")
    return np.clip(lam, 0.0, None)


def vne_from_spectrum(eigenvalues) -> float:
    """``-sum lam ln lam`` with ``0 ln 0 = 0``."""
    lam = np.asarray(eigenvalues, dtype=float)
    lam = lam[lam > 0]
    return float(-np.sum(lam * np.log(lam)))


def le_from_spectrum(eigenvalues) -> float:
    lam = np.asarray(eigenvalues, dtype=float)
    return float(1.0 - np.sum(lam**2))


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy ``-Tr rho ln rho`` via a Hermitian eigensolve."""
    return vne_from_spectrum(_spectrum(rho))


def tsallis_entropy(rho, q: float) -> float:
    """Tsallis entropy ``(Tr rho - Tr rho^q) / (q - 1)``.

    For ``q <= 0`` the power runs over the support of ``rho`` only.
    """
    if q == 1:
        raise ValueError("q = 1 is the von Neumann limit; use von_neumann_entropy")
    lam = _spectrum(rho)
    if q <= 0:
        lam = lam[lam > 1e-14]
    return float((lam.sum() - np.sum(lam**q)) / (q - 1.0))


def eigen_pairs(rho, tol: float = PAIRING_TOL) -> SchmidtSpectrum:
    """Group the spectrum of ``rho`` into degenerate pairs.

    Raises if any pair is split by more than ``tol`` times the largest
    eigenvalue, which signals a density matrix that cannot come from a pure
    two-fermion state.
    """
    lam = np.sort(_spectrum(rho))[::-1]
    if len(lam) % 2:
        # odd dimension: the unpaired eigenvalue must vanish
        if lam[-1] > tol * lam[0]:
            raise ValueError("odd-dimensional rho with nonzero unpaired eigenvalue")
        lam = lam[:-1]
    first, second = lam[0::2], lam[1::2]
    defect = float(np.abs(first - second).max()) if len(first) else 0.0
    if defect > tol * lam[0]:
        raise ValueError(
            f"eigenvalues are not pairwise degenerate (defect {defect:.3e}); "
            "not a pure two-fermion density matrix"
        )
    weights = 0.5 * (first + second)
    weights = weights / (2.0 * weights.sum())
    order = np.argsort(-weights, kind="stable")
    return SchmidtSpectrum(weights[order], defect)


def slater_rank_estimate(rho, tol: float = 1e-8) -> int:
    """Number of Slater-determinant pairs with weight above ``tol``."""
    spec = rho if isinstance(rho, SchmidtSpectrum) else eigen_pairs(rho)
    return int(np.count_nonzero(spec.pair_weights > tol))


def _check_range(value: float, lo: float, hi: float, what: str) -> float:
    if not (lo - RANGE_SLACK <= value <= hi + RANGE_SLACK):
        raise ValueError(f"{what} {value} outside [{lo}, {hi}]")
    return value


def normalized_le(le: float, n_pairs: int) -> float:
    """Map ``le`` from ``[1/2, 1 - 1/(2N)]`` onto ``[0, 1]``."""
    if n_pairs < 2:
        raise ValueError("normalization needs at least two pairs")
    hi = 1.0 - 1.0 / (2 * n_pairs)
    _check_range(le, 0.5, hi, "linear entropy")
    return min(max((le - 0.5) / (hi - 0.5), 0.0), 1.0)


def normalized_vne(vne: float, n_pairs: int) -> float:
    """Map ``vne`` from ``[ln 2, ln 2N]`` onto ``[0, 1]``."""
    if n_pairs < 2:
        raise ValueError("normalization needs at least two pairs (ln N = 0)")
    _check_range(vne, math.log(2), math.log(2 * n_pairs), "von Neumann entropy")
    return min(max((vne - math.log(2)) / math.log(n_pairs), 0.0), 1.0)


# Binary dumps: 16-byte header (magic, uint32 dim, 8 reserved bytes) followed by
# row-major little-endian complex128.
_MATRIX_MAGIC = b"OMG1"
_MATRIX_HEADER = struct.Struct("<4sI8x")


def write_matrix_dump(path, matrix) -> None:
    if isinstance(matrix, (OmegaMatrix, DensityMatrix1P)):
        matrix = matrix.entries
    mat = np.ascontiguousarray(matrix, dtype="<c16")
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("only square matrices can be dumped")
    with open(path, "wb") as fh:
        fh.write(_MATRIX_HEADER.pack(_MATRIX_MAGIC, mat.shape[0]))
        fh.write(mat.tobytes())


def read_matrix_dump(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    magic, dim = _MATRIX_HEADER.unpack_from(raw)
    if magic != _MATRIX_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = np.frombuffer(raw, dtype="<c16", offset=_MATRIX_HEADER.size)
    if body.size != dim * dim:
        raise ValueError("truncated matrix dump")
    return body.reshape(dim, dim).astype(np.complex128)
