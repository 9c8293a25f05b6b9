"""Closed three-variable model of two monitored atoms at zero magnetization.

With two atoms the sector is two-dimensional and the expectation values of
the pair-exchange quadratures and the population imbalance close on
themselves, giving a stochastic ODE for (s_x, s_y, s_z):

    d(s)/dtau = A s dtau - 2 sqrt(2) xi (s_x s_z, s_y s_z, s_z^2 - 1)^T dW

    A = [[-4 xi^2,   -/+ 2,      0      ],
         [ +/- 2,    -4 xi^2,   -/+ 4 sqrt(2)],
         [ 0,        +/- 4 sqrt(2),  0  ]]

with the upper signs for antiferromagnetic and the lower for ferromagnetic
interactions. The module shares nothing numerical with the wavefunction
integrator except the increment streams, so agreement between the two under
identical noise validates both implementations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import SectorError, StateVector, build_sector
from .integrators import IntegratorConfig, sse_step
from .noise import NoiseStream

__all__ = [
    "BlochState",
    "drift_matrix",
    "bloch_step",
    "run_bloch",
    "bloch_vs_sse_check",
    "BlochCheckReport",
]

SQRT2 = np.sqrt(2.0)

# two-atom operators in the (|0,2,0>, |1,0,1>) basis
PAIR_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAIR_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
IMBALANCE_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


@dataclass(frozen=True)
class BlochState:
    s_x: float
    s_y: float
    s_z: float

    def as_array(self) -> np.ndarray:
        return np.array([self.s_x, self.s_y, self.s_z])

    def n0_fraction(self) -> float:
        """Population fraction of the spin-0 component, (1 + s_z) / 2."""
        return 0.5 * (1.0 + self.s_z)


def drift_matrix(sigma: int, xi: float) -> np.ndarray:
    if sigma not in (+1, -1):
        raise SectorError(f"sigma must be +1 or -1, got {sigma}")
    s = float(sigma)
    d = -4.0 * xi * xi
    return np.array(
        [
            [d, -2.0 * s, 0.0],
            [2.0 * s, d, -4.0 * SQRT2 * s],
            [0.0, 4.0 * SQRT2 * s, 0.0],
        ]
    )


def bloch_step(state: BlochState, sigma: int, xi: float, dt: float, dW: float) -> BlochState:
    """Euler-Maruyama update of the closed two-atom equations."""
    v = state.as_array()
    a = drift_matrix(sigma, xi)
    noise = -2.0 * SQRT2 * xi * dW * np.array(
        [v[0] * v[2], v[1] * v[2], v[2] * v[2] - 1.0]
    )
    out = v + dt * (a @ v) + noise
    return BlochState(float(out[0]), float(out[1]), float(out[2]))


def run_bloch(initial: BlochState, sigma: int, xi: float, dt: float,
              n_steps: int, dws: np.ndarray) -> np.ndarray:
    """Integrate the closed model with a given increment sequence.

    Returns an (n_steps + 1, 3) array including the initial point. Batched
    internally; a whole ensemble can be run by passing dws of shape
    (n_steps, n_traj), in which case the result is (n_steps + 1, 3, n_traj).
    """
    dws = np.asarray(dws, dtype=float)
    if dws.shape[0] != n_steps:
        raise ValueError("increment array does not cover n_steps")
    a = drift_matrix(sigma, xi)
    v = np.broadcast_to(initial.as_array().reshape(3, *([1] * (dws.ndim - 1))),
                        (3,) + dws.shape[1:]).copy()
    out = np.empty((n_steps + 1,) + v.shape)
    out[0] = v
    c = -2.0 * SQRT2 * xi
    for s in range(n_steps):
        drift = np.tensordot(a, v, axes=(1, 0))
        noise = c * dws[s] * np.stack([v[0] * v[2], v[1] * v[2], v[2] * v[2] - 1.0])
        v = v + dt * drift + noise
        out[s + 1] = v
    return out


@dataclass(frozen=True)
class BlochCheckReport:
    """Outcome of driving the closed model and the two-atom wavefunction
    integrator with identical increment streams."""

    times: np.ndarray
    max_deviation: float
    deviation_per_time: np.ndarray
    n_trajectories: int
    dt: float


def _sse_bloch_expectations(xi: float, sigma: int, dt: float, n_steps: int,
                            dws: np.ndarray, initial_amps) -> np.ndarray:
    basis = build_sector(2, 0)
    from .fock import build_hamiltonian, n0_diagonal

    h = build_hamiltonian(basis, sigma, 0.0)
    n0 = n0_diagonal(basis)
    state = StateVector.from_amplitudes(basis, initial_amps)
    out = np.empty((n_steps + 1, 3))

    def expect(st):
        a = st.amplitudes
        return np.array([
            np.vdot(a, PAIR_X @ a).real,
            np.vdot(a, PAIR_Y @ a).real,
            np.vdot(a, IMBALANCE_Z @ a).real,
        ])

    out[0] = expect(state)
    for s in range(n_steps):
        state = sse_step(state, h, n0, xi, dt, dws[s])
        out[s + 1] = expect(state)
    return out


def bloch_vs_sse_check(xi: float, t_final: float, n_traj: int, seed: int,
                       dt: float = 1e-3, sigma: int = +1) -> BlochCheckReport:
    """Cross-validate the two integrators on shared noise.

    Every trajectory starts from the all-spin-0 two-atom state, i.e.
    (s_x, s_y, s_z) = (0, 0, 1). Reports the largest absolute deviation of
    the three expectation values across all times and trajectories.
    """
    n_steps = max(1, int(round(t_final / dt)))
    times = np.arange(n_steps + 1) * dt
    dev = np.zeros(n_steps + 1)
    for i in range(n_traj):
        dws = NoiseStream(seed, i).increments(n_steps, dt)
        sse = _sse_bloch_expectations(xi, sigma, dt, n_steps, dws, [1.0, 0.0])
        closed = run_bloch(BlochState(0.0, 0.0, 1.0), sigma, xi, dt, n_steps, dws)
        dev = np.maximum(dev, np.max(np.abs(sse - closed), axis=1))
    return BlochCheckReport(
        times=times,
        max_deviation=float(dev.max()),
        deviation_per_time=dev,
        n_trajectories=n_traj,
        dt=dt,
    )
