"""Fixed-(N, M) Fock sectors of a single-mode spin-1 gas and the operators on them.

A spin-1 condensate in the single-mode approximation conserves the total atom
number N and the magnetization M = N_plus - N_minus, so the dynamics block-
diagonalizes into sectors spanned by Fock states |N_plus, N_0, N_minus>.
Within a sector the pair-exchange interaction only connects neighbouring
states of the ladder k -> k + 1 (two spin-0 atoms converting into a +1/-1
pair), which makes the spin Hamiltonian a real symmetric tridiagonal matrix.

All containers here are immutable after construction and safe to share
between concurrent workers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SectorError",
    "SectorBasis",
    "HamiltonianMatrix",
    "StateVector",
    "DensityMatrix",
    "build_sector",
    "build_hamiltonian",
    "n0_diagonal",
    "expectation",
]

NORM_TOL = 1e-10


class SectorError(ValueError):
    """Raised for invalid sector parameters or mismatched bases."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SectorBasis:
    """Ordered Fock basis of the sector with fixed atom number and magnetization.

    States are the triples (N_plus, N_0, N_minus) = (k, N - 2k - m, k + m)
    with m = -M, listed with k ascending. The dimension is
    floor((N - |M|)/2) + 1.
    """

    n_total: int
    magnetization: int
    states: tuple[tuple[int, int, int], ...]
    _index: dict = field(repr=False, hash=False, compare=False, default=None)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index_of(self, triple: tuple[int, int, int]) -> int:
        return self._index[tuple(triple)]

    def occupations(self) -> np.ndarray:
        """(dim, 3) integer array of (N_plus, N_0, N_minus) rows."""
        return np.array(self.states, dtype=np.int64)

    def basis_state(self, index: int) -> "StateVector":
        """Fock basis vector at the given ladder position."""
        amps = np.zeros(self.dim, dtype=np.complex128)
        amps[index] = 1.0
        return StateVector(self, _readonly(amps))


def build_sector(n_total: int, magnetization: int) -> SectorBasis:
    """Enumerate the Fock sector with the given atom number and magnetization.

    Rejects N < 1 and |M| > N. Both parities of N - |M| are supported.
    """
    n, mag = int(n_total), int(magnetization)
    if n < 1:
        raise SectorError(f"atom number must be positive, got {n}")
    if abs(mag) > n:
        raise SectorError(f"|magnetization| must not exceed N: got M={mag}, N={n}")
    m = -mag
    k_min = max(0, -m)
    k_max = (n + mag) // 2 if mag > 0 else (n - abs(mag)) // 2 + k_min
    states = []
    for k in range(k_min, k_max + 1):
        triple = (k, n - 2 * k - m, k + m)
        if min(triple) < 0:
            break
        states.append(triple)
    basis = SectorBasis(n, mag, tuple(states))
    object.__setattr__(basis, "_index", {t: i for i, t in enumerate(states)})
    assert basis.dim == (n - abs(mag)) // 2 + 1
    return basis


@dataclass(frozen=True)
class HamiltonianMatrix:
    """Dimensionless spin Hamiltonian of a sector, in units of |lambda|.

    sigma = +1 selects antiferromagnetic and -1 ferromagnetic interactions;
    q_prime is the effective quadratic Zeeman shift entering as -q' * N_0 on
    the diagonal. The matrix is real symmetric tridiagonal in the k-ordered
    basis: the only off-diagonal process is pair exchange k <-> k + 1.
    """

    basis: SectorBasis
    sigma: int
    q_prime: float
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.dim

    def dense(self) -> np.ndarray:
        h = np.diag(self.diagonal)
        if self.dim > 1:
            h += np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)
        return h

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Tridiagonal matrix-vector product along the last axis."""
        out = self.diagonal * vec
        if self.dim > 1:
            out[..., :-1] += self.off_diagonal * vec[..., 1:]
            out[..., 1:] += self.off_diagonal * vec[..., :-1]
        return out

    def eigenvalues(self) -> np.ndarray:
        from scipy.linalg import eigh_tridiagonal

        if self.dim == 1:
            return self.diagonal.copy()
        return eigh_tridiagonal(self.diagonal, self.off_diagonal, eigvals_only=True)

    def max_adjacent_gap(self) -> float:
        """Largest spacing between neighbouring eigenvalues; sets the fastest
        oscillation a fixed-step integrator has to resolve."""
        w = self.eigenvalues()
        if len(w) < 2:
            return 0.0
        return float(np.max(np.diff(w)))


def build_hamiltonian(basis: SectorBasis, sigma: int, q_prime: float = 0.0) -> HamiltonianMatrix:
    """Assemble the sector Hamiltonian for the given interaction sign and q'.

    Diagonal entry at (N_plus, N_0, N_minus):
        sigma * [M^2 + (2 N_0 - 1)(N_plus + N_minus)] - q' * N_0
    Coupling between ladder neighbours (pair exchange, evaluated at the
    source triple):
        sigma * 2 * sqrt((N_plus + 1)(N_minus + 1) N_0 (N_0 - 1))
    """
    if sigma not in (+1, -1):
        raise SectorError(f"sigma must be +1 or -1, got {sigma}")
    occ = basis.occupations()
    npl, nz, nmi = occ[:, 0].astype(float), occ[:, 1].astype(float), occ[:, 2].astype(float)
    mag = float(basis.magnetization)
    diag = sigma * (mag**2 + (2.0 * nz - 1.0) * (npl + nmi)) - q_prime * nz
    off = sigma * 2.0 * np.sqrt((npl[:-1] + 1.0) * (nmi[:-1] + 1.0) * nz[:-1] * (nz[:-1] - 1.0))
    return HamiltonianMatrix(basis, sigma, float(q_prime), _readonly(diag), _readonly(off))


def n0_diagonal(basis: SectorBasis) -> np.ndarray:
    """Diagonal of the measured observable N_0 in the sector basis."""
    return _readonly(basis.occupations()[:, 1].astype(float))


@dataclass(frozen=True)
class StateVector:
    """Pure conditional state over a sector basis; unit norm within 1e-10."""

    basis: SectorBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        if len(self.amplitudes) != self.basis.dim:
            raise SectorError("amplitude vector does not match basis dimension")
        nrm2 = float(np.sum(np.abs(self.amplitudes) ** 2))
        if abs(nrm2 - 1.0) > NORM_TOL:
            raise SectorError(f"state not normalized: |norm^2 - 1| = {abs(nrm2 - 1.0):.3e}")

    @classmethod
    def from_amplitudes(cls, basis: SectorBasis, amplitudes) -> "StateVector":
        """Normalize the given amplitudes and wrap them as a state."""
        amps = np.asarray(amplitudes, dtype=np.complex128)
        nrm = np.linalg.norm(amps)
        if nrm == 0.0:
            raise SectorError("cannot normalize a zero vector")
        return cls(basis, _readonly(amps / nrm))

    @property
    def dim(self) -> int:
        return self.basis.dim

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.basis, _readonly(np.outer(self.amplitudes, self.amplitudes.conj())))


@dataclass(frozen=True)
class DensityMatrix:
    """Conditional density matrix over a sector basis.

    Hermitian with unit trace within 1e-10. States built through
    ``from_matrix`` or ``pure`` additionally satisfy the strict positivity
    bound (eigenvalues above -1e-10); states emerging from a conditional
    evolution step may transiently dip as low as the integrator's abort
    floor of -1e-6 before that step is declared divergent.
    """

    basis: SectorBasis
    entries: np.ndarray

    # conditional steps may undershoot strict positivity by O(xi^2 dt)
    EIGEN_FLOOR = -1e-6

    def __post_init__(self):
        m = self.entries
        if m.shape != (self.basis.dim, self.basis.dim):
            raise SectorError("matrix does not match basis dimension")
        if not np.allclose(m, m.conj().T, atol=NORM_TOL, rtol=0.0):
            raise SectorError("density matrix is not Hermitian within tolerance")
        tr = float(np.trace(m).real)
        if abs(tr - 1.0) > NORM_TOL:
            raise SectorError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
        wmin = float(np.linalg.eigvalsh(m)[0])
        if wmin < self.EIGEN_FLOOR:
            raise SectorError(f"negative eigenvalue {wmin:.3e} beyond floor")

    @classmethod
    def from_matrix(cls, basis: SectorBasis, entries) -> "DensityMatrix":
        """Symmetrize and trace-normalize, then validate with the strict
        positivity bound."""
        m = np.asarray(entries, dtype=np.complex128)
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if tr <= 0.0:
            raise SectorError("matrix has non-positive trace")
        rho = cls(basis, _readonly(m / tr))
        wmin = float(np.linalg.eigvalsh(rho.entries)[0])
        if wmin < -NORM_TOL:
            raise SectorError(f"negative eigenvalue {wmin:.3e} beyond tolerance")
        return rho

    @property
    def dim(self) -> int:
        return self.basis.dim

    def purity(self) -> float:
        return float(np.sum(np.abs(self.entries) ** 2))

    def populations(self) -> np.ndarray:
        return self.entries.diagonal().real.copy()


def expectation(state, observable) -> float:
    """<psi|O|psi> or Tr(rho O) for a diagonal (1-D) or full (2-D) observable.

    The imaginary residue of the quadratic form must stay below 1e-10; it is
    asserted and discarded.
    """
    obs = np.asarray(observable)
    if isinstance(state, StateVector):
        dim, amps = state.dim, state.amplitudes
        if obs.ndim == 1:
            if len(obs) != dim:
                raise SectorError("observable dimension mismatch")
            return float(np.sum(state.probabilities() * obs.real))
        if obs.shape != (dim, dim):
            raise SectorError("observable dimension mismatch")
        val = np.vdot(amps, obs @ amps)
    elif isinstance(state, DensityMatrix):
        dim = state.dim
        if obs.ndim == 1:
            if len(obs) != dim:
                raise SectorError("observable dimension mismatch")
            return float(np.sum(state.populations() * obs.real))
        if obs.shape != (dim, dim):
            raise SectorError("observable dimension mismatch")
        val = np.trace(state.entries @ obs)
    else:
        raise TypeError(f"unsupported state type {type(state)!r}")
    if abs(val.imag) > NORM_TOL:
        raise SectorError(f"imaginary residue {val.imag:.3e} exceeds tolerance")
    return float(val.real)
