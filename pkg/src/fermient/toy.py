"""Analytic 2N-mode two-fermion state chi(alpha).

The state has one dominant pair (modes 1, 2) and N - 1 equal minority pairs;
``alpha = 0`` is a single Slater determinant and ``alpha = 1`` the maximally
correlated state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entanglement import (
    OmegaMatrix,
    le_from_spectrum,
    linear_entropy,
    normalized_le,
    normalized_vne,
    vne_from_spectrum,
)

__all__ = [
    "ToyModelParams",
    "chi_pair_amplitudes",
    "build_chi_omega",
    "chi_spectrum",
    "le_chi_closed",
    "le_chi_normalized",
    "vne_chi_normalized",
    "vne_chi_closed",
    "sweep_alpha",
    "SWEEP_COLUMNS",
    "write_sweep_csv",
]

# Above this many pairs the generic path reads the spectrum off the block
# structure instead of allocating the dense 2N x 2N matrix.
DENSE_PAIR_LIMIT = 64
CONSISTENCY_TOL = 1e-9

SWEEP_COLUMNS = ("alpha", "le_norm", "vne_norm", "le", "vne")


@dataclass(frozen=True)
class ToyModelParams:
    n_pairs: int
    alpha: float

    def __post_init__(self):
        if int(self.n_pairs) != self.n_pairs or self.n_pairs < 1:
            raise ValueError("n_pairs must be a positive integer")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


def chi_pair_amplitudes(p: ToyModelParams) -> np.ndarray:
    """Upper-triangle amplitudes ``w_{2k-1,2k}`` for k = 1..N."""
    n, a = p.n_pairs, p.alpha
    amps = np.full(n, math.sqrt(a * (2 - a) / (2 * n)))
    amps[0] = math.sqrt((1 + (n - 1) * (1 - a) ** 2) / (2 * n))
    return amps


def build_chi_omega(p: ToyModelParams) -> OmegaMatrix:
    n = p.n_pairs
    mat = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    idx = np.arange(n)
    amps = chi_pair_amplitudes(p)
    mat[2 * idx, 2 * idx + 1] = amps
    mat[2 * idx + 1, 2 * idx] = -amps
    return OmegaMatrix(mat)


def chi_spectrum(p: ToyModelParams) -> np.ndarray:
    """Eigenvalues of rho(chi), read from its diagonal (each pair weight twice)."""
    w = chi_pair_amplitudes(p) ** 2
    w = w / (2 * w.sum())
    return np.repeat(w, 2)


def le_chi_closed(p: ToyModelParams) -> float:
    n, a = p.n_pairs, p.alpha
    return 1 - 1 / (2 * n) - (1 - a) ** 4 * (n - 1) / (2 * n)


def le_chi_normalized(p: ToyModelParams) -> float:
    return 1 - (1 - p.alpha) ** 4


def _xlogx_over(x: float, n: int) -> float:
    return 0.0 if x == 0 else x * math.log(x / n)


def vne_chi_normalized(p: ToyModelParams) -> float:
    n, a = p.n_pairs, p.alpha
    if n < 2:
        raise ValueError("normalized vNE needs N >= 2 (ln N = 0 for N = 1)")
    minority = a * (2 - a)
    majority = 1 + (1 - a) ** 2 * (n - 1)
    return -((n - 1) * _xlogx_over(minority, n) + _xlogx_over(majority, n)) / (n * math.log(n))


def vne_chi_closed(p: ToyModelParams) -> float:
    """Unnormalized vNE: ``ln 2 + ln N * vne_chi_normalized``."""
    return math.log(2) + math.log(p.n_pairs) * vne_chi_normalized(p)


def _generic_measures(p: ToyModelParams) -> tuple[float, float]:
    """(LE, vNE) from the generic pipeline: Omega for LE, spectrum for vNE."""
    spectrum = chi_spectrum(p)
    if p.n_pairs <= DENSE_PAIR_LIMIT:
        le = linear_entropy(build_chi_omega(p))
    else:
        le = le_from_spectrum(spectrum)
    return le, vne_from_spectrum(spectrum)


def sweep_alpha(n_pairs: int, n_points: int) -> np.ndarray:
    """Normalized and raw LE / vNE of chi on a uniform alpha grid over [0, 1].

    Returns a structured array with fields :data:`SWEEP_COLUMNS`. Every row is
    computed twice (closed form and generic pipeline) and the two must agree.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if n_pairs < 2:
        raise ValueError("sweep needs n_pairs >= 2 for vNE normalization")
    table = np.zeros(n_points, dtype=[(c, "f8") for c in SWEEP_COLUMNS])
    for row, alpha in zip(table, np.linspace(0.0, 1.0, n_points)):
        p = ToyModelParams(n_pairs, float(alpha))
        le, vne = _generic_measures(p)
        le_c, vne_c = le_chi_closed(p), vne_chi_closed(p)
        if abs(le - le_c) > CONSISTENCY_TOL or abs(vne - vne_c) > CONSISTENCY_TOL:
            raise RuntimeError(f"closed form and generic pipeline disagree at alpha={alpha}")
        row["alpha"] = alpha
        row["le"], row["vne"] = le_c, vne_c
        row["le_norm"] = le_chi_normalized(p)
        row["vne_norm"] = vne_chi_normalized(p)
        # generic normalization must reproduce the closed forms
        if (abs(normalized_le(le, n_pairs) - row["le_norm"]) > CONSISTENCY_TOL
                or abs(normalized_vne(vne, n_pairs) - row["vne_norm"]) > CONSISTENCY_TOL):
            raise RuntimeError(f"normalized measures disagree at alpha={alpha}")
    return table


def write_sweep_csv(table: np.ndarray, path, header_lines=()) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in table:
            fh.write(",".join(f"{row[c]:.12g}" for c in SWEEP_COLUMNS) + "\n")
