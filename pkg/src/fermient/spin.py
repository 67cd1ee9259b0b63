"""Spin configurations of the two-electron state and their Omega matrices.

The spatial part is always propagated as the unsymmetrized product
``F(r1, r2)``. Because the Hamiltonian commutes with particle exchange, the
antisymmetric part ``A`` and symmetric part ``S`` of ``F`` evolve
independently, and every spin configuration is assembled from them:

==========================  ====================================
same spin ``Psi``           ``[[A, 0], [0, 0]]``
triplet ``Xi``              ``[[A, 0], [0, -A]] / sqrt 2``
singlet ``Phi``             ``[[0, -S], [S, 0]] / sqrt 2``
opposite spins ``Upsilon``  ``[[a A, -s S], [s S, -a A]]``
==========================  ====================================

Modes are ordered (spatial point, spin block). The Gram blocks of these
matrices give the entropies without building the ``2M x 2M`` matrix.
``a`` and ``s`` are the norms of the two parts before normalization (equal
for a product of orthogonal orbitals), and the opposite-spin matrix is
scaled to unit norm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from enum import Enum
from typing import Optional

import numpy as np

from .core import WaveFn2P
from .entanglement import OmegaMatrix, purity_from_gram, vne_from_spectrum

__all__ = [
    "SpinConfig",
    "SpatialBlocks",
    "spatial_blocks",
    "build_spin_omega",
    "triplet_from_same_spin",
    "spin_entropies",
    "spin_spectrum",
    "spin_vne",
    "n_pairs",
]


class SpinConfig(str, Enum):
    SAME_SPIN = "same_spin"
    OPPOSITE = "opposite"
    SINGLET = "singlet"
    TRIPLET = "triplet"


@dataclass(frozen=True, eq=False)
class SpatialBlocks:
    """Unit-norm antisymmetric (``A``) and symmetric (``S``) parts of ``F``.

    ``a_norm`` and ``s_norm`` keep the Frobenius norms before normalization;
    the opposite-spin state mixes both blocks with these relative weights.
    ``S`` is ``None`` when the symmetric part vanishes.
    """

    A: np.ndarray
    S: Optional[np.ndarray]
    a_norm: float
    s_norm: float

    def __post_init__(self):
        if abs(np.linalg.norm(self.A) - 1) > 1e-12:
            raise ValueError("A must have unit Frobenius norm")
        if np.abs(self.A + self.A.T).max() > 1e-10:
            raise ValueError("A must be antisymmetric")
        if self.S is not None:
            if abs(np.linalg.norm(self.S) - 1) > 1e-12:
                raise ValueError("S must have unit Frobenius norm")
            if np.abs(self.S - self.S.T).max() > 1e-10:
                raise ValueError("S must be symmetric")

    @classmethod
    def from_matrix(cls, f: np.ndarray, rel_tol: float = 1e-12) -> "SpatialBlocks":
        """Split a square amplitude matrix ``F`` into its exchange parts."""
        f = np.asarray(f, dtype=np.complex128)
        total = np.linalg.norm(f)
        if total == 0:
            raise ValueError("zero amplitude matrix")
        a = 0.5 * (f - f.T)
        s = 0.5 * (f + f.T)
        a_norm, s_norm = float(np.linalg.norm(a)), float(np.linalg.norm(s))
        if a_norm <= rel_tol * total:
            raise ValueError("antisymmetric part vanishes (identical orbitals)")
        if s_norm <= rel_tol * total:
            return cls(a / a_norm, None, a_norm, 0.0)
        return cls(a / a_norm, s / s_norm, a_norm, s_norm)

    @property
    def n_modes(self) -> int:
        return self.A.shape[0]

    def _require_s(self) -> np.ndarray:
        if self.S is None:
            raise ValueError("symmetric part vanishes; configuration undefined")
        return self.S

    # Gram products are shared by all spin configurations of one snapshot
    @cached_property
    def gram_a(self) -> np.ndarray:
        return _gram(self.A)

    @cached_property
    def gram_s(self) -> np.ndarray:
        return _gram(self._require_s())

    @cached_property
    def cross_as(self) -> np.ndarray:
        return self.A.conj().T @ self._require_s()


def spatial_blocks(state: WaveFn2P) -> SpatialBlocks:
    """Exchange blocks of a propagated product state.

    Amplitudes are multiplied by the cell weight ``dx*dy`` so the mode
    coefficients are dimensionless.
    """
    return SpatialBlocks.from_matrix(state.as_matrix() * state.grid.cell_area)


def build_spin_omega(blocks: SpatialBlocks, spin: SpinConfig) -> OmegaMatrix:
    """Dense ``2M x 2M`` Omega for ``spin`` (unit Frobenius norm)."""
    spin = SpinConfig(spin)
    a = blocks.A
    z = np.zeros_like(a)
    if spin is SpinConfig.SAME_SPIN:
        mat = np.block([[a, z], [z, z]])
    elif spin is SpinConfig.TRIPLET:
        mat = np.block([[a, z], [z, -a]]) / math.sqrt(2)
    elif spin is SpinConfig.SINGLET:
        s = blocks._require_s()
        mat = np.block([[z, -s], [s, z]]) / math.sqrt(2)
    else:
        wa, ws = blocks.a_norm, blocks.s_norm
        s = blocks.S if blocks.S is not None else z
        mat = np.block([[wa * a, -ws * s], [ws * s, -wa * a]])
        mat /= np.linalg.norm(mat)
    return OmegaMatrix(mat)


def triplet_from_same_spin(le_same_spin: float) -> float:
    """Triplet LE from the same-spin LE: ``(1 + e) / 2``."""
    if not 0.5 - 1e-12 <= le_same_spin <= 1.0:
        raise ValueError(f"same-spin linear entropy {le_same_spin} outside [1/2, 1]")
    return 0.5 * (1.0 + le_same_spin)


def _gram(x: np.ndarray) -> np.ndarray:
    return x.conj().T @ x


def _opposite_blocks(blocks: SpatialBlocks) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal Gram blocks ``P, Q`` of the opposite-spin Omega.

    ``Omega^+ Omega = [[P, -Q], [-Q, P]]`` with ``P = A^+A + S^+S`` and
    ``Q = A^+S + S^+A`` (weights included).
    """
    wa, ws = blocks.a_norm, blocks.s_norm
    if blocks.S is None:
        return wa**2 * blocks.gram_a, np.zeros_like(blocks.A)
    cross = wa * ws * blocks.cross_as
    return wa**2 * blocks.gram_a + ws**2 * blocks.gram_s, cross + cross.conj().T


def spin_entropies(blocks: SpatialBlocks, spin: SpinConfig) -> float:
    """Linear entropy of ``spin`` from the spatial blocks, without eigensolves.

    Agrees with ``linear_entropy(build_spin_omega(blocks, spin))``.
    """
    spin = SpinConfig(spin)
    if spin is SpinConfig.SAME_SPIN:
        return 1.0 - purity_from_gram(blocks.gram_a)
    if spin is SpinConfig.TRIPLET:
        # rho = diag(G, G) / 2 Tr G
        return 1.0 - 0.5 * purity_from_gram(blocks.gram_a)
    if spin is SpinConfig.SINGLET:
        return 1.0 - 0.5 * purity_from_gram(blocks.gram_s)
    p, q = _opposite_blocks(blocks)
    tr = 2.0 * np.trace(p).real
    return float(1.0 - 2.0 * (np.vdot(p, p).real + np.vdot(q, q).real) / tr**2)


def spin_spectrum(blocks: SpatialBlocks, spin: SpinConfig) -> np.ndarray:
    """Eigenvalues of rho for ``spin``, from Hermitian solves on ``M x M`` blocks."""
    spin = SpinConfig(spin)
    if spin is SpinConfig.SAME_SPIN:
        lam = np.linalg.eigvalsh(blocks.gram_a)
        lam = np.concatenate([lam, np.zeros_like(lam)])
    elif spin is SpinConfig.TRIPLET:
        lam = np.tile(np.linalg.eigvalsh(blocks.gram_a), 2)
    elif spin is SpinConfig.SINGLET:
        lam = np.tile(np.linalg.eigvalsh(blocks.gram_s), 2)
    else:
        # [[P, -Q], [-Q, P]] is block-diagonalized by the Hadamard rotation
        p, q = _opposite_blocks(blocks)
        lam = np.concatenate([np.linalg.eigvalsh(p - q), np.linalg.eigvalsh(p + q)])
    lam = np.clip(lam, 0.0, None)
    return lam / lam.sum()


def spin_vne(blocks: SpatialBlocks, spin: SpinConfig) -> float:
    return vne_from_spectrum(spin_spectrum(blocks, spin))


def n_pairs(blocks: SpatialBlocks) -> int:
    """Number of Slater pairs of the ``2M``-mode spin-orbital space (``M``)."""
    return blocks.n_modes
