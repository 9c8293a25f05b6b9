"""Analytic and numerical ground states of the spin-mixing Hamiltonian.

For antiferromagnetic interactions the zero-magnetization ground state is the
collective singlet, whose ladder amplitudes follow a two-term recursion and
can be built without diagonalizing anything. For ferromagnetic interactions
the ground energy is shared by one state in every magnetization sector
(a 2N+1-fold degenerate manifold); each member is obtained by an independent
sector diagonalization, so the degeneracy never collides within one solve.

Phase conventions are fixed so that repeated runs produce identical output:
the recursion state has a positive first amplitude, and numerically computed
ground states have their largest-magnitude amplitude positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .fock import (
    HamiltonianMatrix,
    SectorBasis,
    SectorError,
    StateVector,
    build_hamiltonian,
    build_sector,
)

__all__ = ["SpectrumResult", "spectrum", "afm_ground_state", "fm_ground_manifold"]

RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class SpectrumResult:
    """Full eigensystem of a sector Hamiltonian, eigenvalues ascending."""

    basis: SectorBasis
    sigma: int
    q_prime: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # orthonormal columns

    @property
    def dim(self) -> int:
        return self.basis.dim

    def gap(self, level: int = 1) -> float:
        """Excitation energy of the given level above the ground state."""
        return float(self.eigenvalues[level] - self.eigenvalues[0])

    def ground_state(self) -> StateVector:
        return _sign_fixed_state(self.basis, self.eigenvectors[:, 0])


def _sign_fixed_state(basis: SectorBasis, vec: np.ndarray) -> StateVector:
    # largest-magnitude amplitude made positive (first such index on ties)
    i = int(np.argmax(np.abs(vec)))
    if vec[i].real < 0:
        vec = -vec
    return StateVector.from_amplitudes(basis, vec.astype(np.complex128))


def spectrum(basis: SectorBasis, sigma: int, q_prime: float = 0.0) -> SpectrumResult:
    """Diagonalize the sector Hamiltonian (tridiagonal solver, dense fallback)."""
    h = build_hamiltonian(basis, sigma, q_prime)
    return spectrum_of(h)


def spectrum_of(h: HamiltonianMatrix) -> SpectrumResult:
    if h.dim == 1:
        w = h.diagonal.copy()
        v = np.ones((1, 1))
    else:
        try:
            w, v = eigh_tridiagonal(h.diagonal, h.off_diagonal)
        except np.linalg.LinAlgError:
            w, v = np.linalg.eigh(h.dense())
    return SpectrumResult(h.basis, h.sigma, h.q_prime, w, v)


def afm_ground_state(n_total: int) -> StateVector:
    """Singlet ground state of the antiferromagnetic interaction at M = 0.

    Ladder amplitudes follow
        A_k = -sqrt((N - 2k + 2) / (N - 2k + 1)) * A_{k-1},
    seeded with A_0 = 1 and normalized afterwards. Only even N is accepted;
    the recursion is anchored on the all-spin-0 Fock state.
    """
    n = int(n_total)
    if n < 2 or n % 2 != 0:
        raise SectorError(f"recursion ground state requires positive even N, got {n}")
    basis = build_sector(n, 0)
    amps = np.empty(basis.dim)
    amps[0] = 1.0
    for k in range(1, basis.dim):
        amps[k] = -np.sqrt((n - 2 * k + 2) / (n - 2 * k + 1)) * amps[k - 1]
    return StateVector.from_amplitudes(basis, amps)


def fm_ground_manifold(n_total: int, m_index: int) -> StateVector:
    """Member m of the degenerate ferromagnetic ground manifold.

    Lives in the sector with magnetization M = -m and is computed as the
    lowest eigenvector of the ferromagnetic Hamiltonian at q' = 0.
    """
    n = int(n_total)
    if abs(m_index) > n:
        raise SectorError(f"empty sector: |m| = {abs(m_index)} exceeds N = {n}")
    basis = build_sector(n, -int(m_index))
    return spectrum(basis, sigma=-1, q_prime=0.0).ground_state()
