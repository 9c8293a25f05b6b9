"""Conditional-evolution steppers and the single-trajectory driver.

Two unravelings of the same measurement model live here:

* ``sse_step`` evolves a pure state under the nonlinear diffusive equation
  (valid for perfect detection). This is the plain-numpy reference
  implementation; production runs go through the compiled batch engine,
  which is cross-checked against it in the test suite.
* ``sme_step`` evolves a conditional density matrix. With the stochastic
  term suppressed (dW = 0) it advances the unconditional master equation,
  which doubles as the oracle for ensemble averages.

Everything uses the Ito convention; increments dW are Normal(0, dt).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import engine
from .fock import DensityMatrix, HamiltonianMatrix, SectorError, StateVector
from .fock import _readonly
from .fock import n0_diagonal as _n0_diagonal
from .noise import NoiseStream

__all__ = [
    "ConfigError",
    "TrajectoryAbort",
    "IntegratorConfig",
    "TrajectoryRecord",
    "sse_step",
    "sme_step",
    "run_trajectory",
    "evolve_density",
    "CURRENT_SIGNAL_GAIN",
]

# photocurrent signal gain: I' = 2 sqrt(2) xi <N0> + dW/dtau
CURRENT_SIGNAL_GAIN = 2.0 * np.sqrt(2.0)

GAP_LIMIT = 0.1


class ConfigError(ValueError):
    """Invalid integration configuration."""


class TrajectoryAbort(RuntimeError):
    """A trajectory left the numerically trustworthy regime (step too large)."""

    def __init__(self, message, step=None, tau=None):
        super().__init__(message)
        self.step = step
        self.tau = tau


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step integration parameters in scaled time.

    The step must resolve the fastest level spacing of the Hamiltonian that
    drives the run: dt * (largest adjacent eigenvalue gap) < 0.1, checked by
    ``validate_against`` when the run is assembled.
    """

    dt: float
    t_final: float
    xi: float
    record_stride: int = 10

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.xi < 0:
            raise ConfigError("xi must be non-negative")
        if self.t_final < self.dt:
            raise ConfigError("t_final must cover at least one step")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        """Total steps, truncated to a whole number of record bins."""
        raw = int(round(self.t_final / self.dt))
        return max(self.record_stride, (raw // self.record_stride) * self.record_stride)

    @property
    def n_samples(self) -> int:
        return self.n_steps // self.record_stride

    @property
    def sample_dt(self) -> float:
        return self.record_stride * self.dt

    def validate_against(self, hamiltonian: HamiltonianMatrix) -> None:
        gap = hamiltonian.max_adjacent_gap()
        if self.dt * gap >= GAP_LIMIT:
            raise ConfigError(
                f"dt={self.dt:g} too coarse for level spacing {gap:g}: "
                f"dt*gap={self.dt * gap:.3g} >= {GAP_LIMIT}"
            )


@dataclass(frozen=True)
class TrajectoryRecord:
    """Sampled time series of one conditional run.

    ``n0_var`` is the quantum fluctuation sqrt(<N0^2> - <N0>^2) of the
    conditional state. ``wiener`` holds the summed increments of each record
    bin (0 for the initial sample), and the scaled photocurrent satisfies
    current[i] = 2 sqrt(2) xi n0_mean[i] + wiener[i] / sample_dt.
    """

    times: np.ndarray
    n0_mean: np.ndarray
    n0_var: np.ndarray
    current: np.ndarray
    wiener: np.ndarray
    seed: int
    trajectory_index: int
    xi: float
    dt: float
    record_stride: int
    n_total: int
    magnetization: int
    sigma: int
    q_prime: float

    @property
    def sample_dt(self) -> float:
        return self.record_stride * self.dt

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "trajectory_index": self.trajectory_index,
            "xi": self.xi,
            "dt": self.dt,
            "record_stride": self.record_stride,
            "N": self.n_total,
            "M": self.magnetization,
            "sigma": self.sigma,
            "q_prime": self.q_prime,
        }


def _drift(amps, h: HamiltonianMatrix, n0, xi2):
    p = amps.real**2 + amps.imag**2
    mean = float(p @ n0) / float(p.sum())
    delta = n0 - mean
    return -1j * h.apply(amps) - (xi2 * delta * delta) * amps


def sse_step(state: StateVector, hamiltonian: HamiltonianMatrix, n0, xi, dt, dW) -> StateVector:
    """One step of the diffusive pure-state unraveling (reference path).

    Drift by the classical 4-stage Runge-Kutta rule with the conditional mean
    re-evaluated at each stage, then a first-order diffusion kick with the
    given increment, then renormalization. Raises TrajectoryAbort if the norm
    collapses below the safety floor before renormalization.
    """
    amps = state.amplitudes
    xi2 = xi * xi
    k1 = _drift(amps, hamiltonian, n0, xi2)
    k2 = _drift(amps + (0.5 * dt) * k1, hamiltonian, n0, xi2)
    k3 = _drift(amps + (0.5 * dt) * k2, hamiltonian, n0, xi2)
    k4 = _drift(amps + dt * k3, hamiltonian, n0, xi2)
    out = amps + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    p = out.real**2 + out.imag**2
    mean = float(p @ n0) / float(p.sum())
    out = out * (1.0 + (np.sqrt(2.0) * xi * dW) * (n0 - mean))
    nrm = np.linalg.norm(out)
    if not (nrm > engine.NORM_FLOOR):
        raise TrajectoryAbort(f"state norm {nrm:.3e} collapsed below {engine.NORM_FLOOR:g}; reduce dt")
    return StateVector(state.basis, _readonly(out / nrm))


def _sme_drift(rho, hd, n0col, n0row, n0sq_half, two_xi2):
    comm = hd @ rho - rho @ hd
    damp = n0col * rho * n0row - n0sq_half * rho - rho * n0sq_half
    return -1j * comm + two_xi2 * damp


NEGATIVITY_ABORT = -1e-6


def sme_step(rho: DensityMatrix, hamiltonian: HamiltonianMatrix, n0, xi, dt, dW) -> DensityMatrix:
    """One step of the conditional master equation.

    Deterministic part (unitary flow plus measurement dephasing) advanced by
    the 4-stage rule; the record-conditioning term applied as a first-order
    kick with the given increment (dW = 0 gives the unconditional equation
    exactly). Hermiticity and unit trace are restored afterwards; an
    eigenvalue below -1e-6 aborts with a step-size diagnostic.
    """
    m = rho.entries
    hd = hamiltonian.dense()
    n0 = np.asarray(n0, dtype=float)
    n0col = n0[:, None]
    n0row = n0[None, :]
    n0sq_half = 0.5 * (n0 * n0)
    two_xi2 = 2.0 * xi * xi
    k1 = _sme_drift(m, hd, n0col, n0row, n0sq_half, two_xi2)
    k2 = _sme_drift(m + (0.5 * dt) * k1, hd, n0col, n0row, n0sq_half, two_xi2)
    k3 = _sme_drift(m + (0.5 * dt) * k2, hd, n0col, n0row, n0sq_half, two_xi2)
    k4 = _sme_drift(m + dt * k3, hd, n0col, n0row, n0sq_half, two_xi2)
    out = m + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if dW != 0.0:
        mean = float((out.diagonal().real * n0).sum() / out.diagonal().real.sum())
        out = out + (np.sqrt(2.0) * xi * dW) * (n0col * out + out * n0row - 2.0 * mean * out)
    out = 0.5 * (out + out.conj().T)
    tr = out.trace().real
    if not (tr > engine.NORM_FLOOR):
        raise TrajectoryAbort(f"density matrix trace {tr:.3e} collapsed; reduce dt")
    out = out / tr
    wmin = float(np.linalg.eigvalsh(out)[0])
    if wmin < NEGATIVITY_ABORT:
        raise TrajectoryAbort(f"density matrix eigenvalue {wmin:.3e} below {NEGATIVITY_ABORT:g}; reduce dt")
    return DensityMatrix(rho.basis, _readonly(out))


def evolve_density(rho: DensityMatrix, hamiltonian: HamiltonianMatrix, config: IntegratorConfig,
                   noise: NoiseStream | None = None, sample_steps=()):
    """Drive the conditional (or, with noise=None, unconditional) master
    equation through a full run; returns {step: DensityMatrix} snapshots at
    the requested steps plus the final state under key config.n_steps."""
    config.validate_against(hamiltonian)
    n0 = _n0_diagonal(hamiltonian.basis)
    n = config.n_steps
    dws = noise.increments(n, config.dt) if noise is not None else np.zeros(n)
    wanted = sorted(set(int(s) for s in sample_steps) | {n})
    snapshots = {}
    for step in range(n):
        rho = sme_step(rho, hamiltonian, n0, config.xi, config.dt, dws[step])
        if step + 1 in wanted:
            snapshots[step + 1] = rho
    return snapshots


def run_trajectory(initial: StateVector, hamiltonian: HamiltonianMatrix,
                   config: IntegratorConfig, noise: NoiseStream) -> TrajectoryRecord:
    """Integrate one conditional run and sample it every record_stride steps.

    The recorded photocurrent is built from the same increments that drove
    the state, binned per record window. Aborts propagate with the failing
    step and time attached.
    """
    if initial.basis != hamiltonian.basis:
        raise SectorError("initial state and Hamiltonian live in different sectors")
    config.validate_against(hamiltonian)
    n0 = _n0_diagonal(hamiltonian.basis)
    out = engine.integrate_sse_batch(
        initial.amplitudes, hamiltonian, n0, config.xi, config.dt,
        config.n_steps, config.record_stride, [noise],
    )
    if out.status[0] != engine.STATUS_OK:
        step = int(out.fail_step[0])
        raise TrajectoryAbort(
            f"trajectory aborted at step {step} (tau={step * config.dt:.6g}): "
            f"norm collapsed below {engine.NORM_FLOOR:g}; reduce dt",
            step=step, tau=step * config.dt,
        )
    return assemble_record(initial, out.n0_mean[0], out.n0_sq[0], out.wiener[0],
                           config, hamiltonian, noise.seed, noise.trajectory_index)


def assemble_record(initial: StateVector, n0_row, n0_sq_row, wiener_row,
                    config: IntegratorConfig, hamiltonian: HamiltonianMatrix,
                    seed: int, trajectory_index: int) -> TrajectoryRecord:
    """Build a TrajectoryRecord from sampled batch rows (initial sample
    prepended; current formed from the recorded bins)."""
    n0 = _n0_diagonal(hamiltonian.basis)
    p0 = initial.probabilities()
    mean0 = float(p0 @ n0)
    sq0 = float(p0 @ (n0 * n0))
    sample_dt = config.sample_dt
    times = np.concatenate(([0.0], (1.0 + np.arange(config.n_samples)) * sample_dt))
    n0_mean = np.concatenate(([mean0], n0_row))
    n0_sq = np.concatenate(([sq0], n0_sq_row))
    wiener = np.concatenate(([0.0], wiener_row))
    n0_var = np.sqrt(np.maximum(n0_sq - n0_mean**2, 0.0))
    current = CURRENT_SIGNAL_GAIN * config.xi * n0_mean + wiener / sample_dt
    basis = hamiltonian.basis
    return TrajectoryRecord(
        times=times, n0_mean=n0_mean, n0_var=n0_var, current=current, wiener=wiener,
        seed=seed, trajectory_index=trajectory_index,
        xi=config.xi, dt=config.dt, record_stride=config.record_stride,
        n_total=basis.n_total, magnetization=basis.magnetization,
        sigma=hamiltonian.sigma, q_prime=hamiltonian.q_prime,
    )
