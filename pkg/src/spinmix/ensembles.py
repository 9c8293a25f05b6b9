"""Reproducible trajectory ensembles and their reductions.

Trajectory i always draws its noise from the counter-based stream keyed by
(master_seed, i), and reductions combine fixed-size chunks in index order,
so an ensemble result is bitwise identical whether it was computed by one
worker or sixteen. Workers only decide how chunks are scheduled.

Also hosts the translation from laboratory cavity/atom parameters to the
dimensionless measurement strength and quadratic shift used everywhere else.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2 as _chi2

from . import engine
from .fock import HamiltonianMatrix, SectorError, StateVector, build_hamiltonian, build_sector, n0_diagonal
from .integrators import (
    CURRENT_SIGNAL_GAIN,
    ConfigError,
    IntegratorConfig,
    TrajectoryRecord,
    assemble_record,
)
from .noise import NoiseStream

__all__ = [
    "PhysicalParams",
    "DimensionlessParams",
    "derive_dimensionless",
    "EnsembleResult",
    "run_ensemble",
    "run_trajectories",
    "conditional_density_average",
    "DensityAverage",
    "SteadyStateResult",
    "steady_state_distribution",
    "CurrentAverage",
    "average_currents",
]

DEFAULT_CHUNK_SIZE = 64
REGIME_FACTOR = 100.0  # "much faster" read as two orders of magnitude


# ---------------------------------------------------------------------------
# physical parameters -> dimensionless couplings

@dataclass(frozen=True)
class PhysicalParams:
    """Laboratory parameters, all in ordinary frequency units (Hz).

    Conversion to angular frequencies happens internally; the dimensionless
    outputs are invariant under the common 2*pi factor, so entering angular
    values consistently would give the same couplings.
    """

    kappa: float        # cavity decay rate
    g0: float           # atom-cavity coupling
    lam: float          # spin-interaction coefficient (nonzero; sign = sigma)
    eta: float          # probe drive amplitude
    delta_pa: float     # probe-atom detuning
    q: float            # bare quadratic Zeeman shift

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if self.lam == 0:
            raise ConfigError("lam must be nonzero")
        if self.delta_pa == 0:
            raise ConfigError("delta_pa must be nonzero")


@dataclass(frozen=True)
class DimensionlessParams:
    xi: float
    q_prime: float
    alpha: float        # intracavity field amplitude of the empty cavity
    u0: float           # dispersive shift per atom, ordinary Hz
    sigma: int          # sign of the spin interaction
    flags: dict
    regime_ok: bool


def derive_dimensionless(p: PhysicalParams) -> DimensionlessParams:
    """xi = U0 eta / sqrt(kappa^3 |lambda|), q' = (q + U0 alpha^2)/|lambda|,
    alpha = eta / kappa, with U0 = g0^2 / delta_pa.

    Leaving the adiabatic/bad-cavity regime only raises warning flags, never
    an error.
    """
    two_pi = 2.0 * np.pi
    kappa = two_pi * p.kappa
    g0 = two_pi * p.g0
    lam = two_pi * p.lam
    eta = two_pi * p.eta
    delta_pa = two_pi * p.delta_pa
    q = two_pi * p.q

    alpha = eta / kappa
    u0 = g0 * g0 / delta_pa
    xi = u0 * eta / np.sqrt(kappa**3 * abs(lam))
    q_prime = (q + u0 * alpha * alpha) / abs(lam)
    flags = {
        "cavity_decay_fast": bool(kappa >= REGIME_FACTOR * abs(lam)),
        "dispersive_shift_small": bool(kappa >= REGIME_FACTOR * abs(u0) * alpha * alpha),
    }
    return DimensionlessParams(
        xi=float(xi),
        q_prime=float(q_prime),
        alpha=float(alpha),
        u0=float(u0 / two_pi),
        sigma=+1 if p.lam > 0 else -1,
        flags=flags,
        regime_ok=all(flags.values()),
    )


# ---------------------------------------------------------------------------
# chunked ensemble execution

def _chunks(run_count: int, chunk_size: int):
    return [(a, min(a + chunk_size, run_count)) for a in range(0, run_count, chunk_size)]


def _run_chunk(payload: dict) -> dict:
    """Integrate one chunk of trajectory indices; executed in-process or in a
    worker. Every quantity is derived only from the payload, so the result is
    independent of scheduling."""
    basis = build_sector(payload["n_total"], payload["magnetization"])
    h = build_hamiltonian(basis, payload["sigma"], payload["q_prime"])
    n0 = n0_diagonal(basis)
    lo, hi = payload["lo"], payload["hi"]
    streams = [NoiseStream(payload["seed"], i) for i in range(lo, hi)]
    out = engine.integrate_sse_batch(
        payload["amps0"], h, n0, payload["xi"], payload["dt"],
        payload["n_steps"], payload["stride"], streams,
        accumulate_from_step=payload.get("accumulate_from_step"),
        snapshot_steps=payload.get("snapshot_steps", ()),
    )
    ok = out.status == engine.STATUS_OK
    failed = [lo + int(i) for i in np.flatnonzero(~ok)]
    result = {
        "lo": lo,
        "hi": hi,
        "n_ok": int(ok.sum()),
        "failed": failed,
        "sum_n0": out.n0_mean[ok].sum(axis=0),
        "sum_n0_sq": (out.n0_mean[ok] ** 2).sum(axis=0),
        "sum_fluct": np.sqrt(np.maximum(out.n0_sq[ok] - out.n0_mean[ok] ** 2, 0.0)).sum(axis=0),
        "sum_wiener": out.wiener[ok].sum(axis=0),
    }
    if payload.get("keep_rows"):
        result["rows"] = {
            "n0_mean": out.n0_mean, "n0_sq": out.n0_sq, "wiener": out.wiener,
            "status": out.status,
        }
    if payload.get("accumulate_from_step") is not None:
        result["probs"] = out.probs_acc / max(out.probs_samples, 1)
        result["finals"] = np.abs(out.final) ** 2
        result["ok_mask"] = ok
    if payload.get("snapshot_steps"):
        snaps = {}
        for step, psi in out.snapshots.items():
            rows = psi[ok]
            outer = rows[:, :, None] * rows.conj()[:, None, :]
            snaps[step] = {
                "sum_outer": outer.sum(axis=0),
                "sum_re2": (outer.real**2).sum(axis=0),
                "sum_im2": (outer.imag**2).sum(axis=0),
            }
        result["snapshots"] = snaps
    return result


def _execute(payloads, workers: int):
    if workers <= 1 or len(payloads) <= 1:
        return [_run_chunk(p) for p in payloads]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_chunk, payloads))


def _payloads(initial: StateVector, hamiltonian: HamiltonianMatrix, config: IntegratorConfig,
              run_count: int, master_seed: int, chunk_size: int, **extra):
    if initial.basis != hamiltonian.basis:
        raise SectorError("initial state and Hamiltonian live in different sectors")
    config.validate_against(hamiltonian)
    basis = hamiltonian.basis
    base = {
        "n_total": basis.n_total,
        "magnetization": basis.magnetization,
        "sigma": hamiltonian.sigma,
        "q_prime": hamiltonian.q_prime,
        "amps0": np.asarray(initial.amplitudes),
        "xi": config.xi,
        "dt": config.dt,
        "n_steps": config.n_steps,
        "stride": config.record_stride,
        "seed": int(master_seed),
        **extra,
    }
    return [{**base, "lo": lo, "hi": hi} for lo, hi in _chunks(run_count, chunk_size)]


@dataclass(frozen=True)
class EnsembleResult:
    """Index-ordered reduction of a trajectory ensemble.

    ``std_n0`` is the across-trajectory sample standard deviation of the
    conditional means; ``mean_n0_fluct`` averages the per-state quantum
    fluctuation sqrt(<N0^2> - <N0>^2) over the runs.
    """

    times: np.ndarray
    mean_n0: np.ndarray
    std_n0: np.ndarray
    mean_current: np.ndarray
    mean_n0_fluct: np.ndarray
    run_count: int
    failed_indices: tuple
    config: IntegratorConfig
    meta: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.failed_indices


def run_ensemble(initial: StateVector, hamiltonian: HamiltonianMatrix, config: IntegratorConfig,
                 run_count: int, master_seed: int, *, workers: int = 1,
                 chunk_size: int = DEFAULT_CHUNK_SIZE) -> EnsembleResult:
    """Run ``run_count`` independent conditional trajectories and average them.

    Trajectory i uses NoiseStream(master_seed, i). A trajectory that aborts is
    reported in ``failed_indices`` and excluded from every statistic; the
    remaining runs still produce a result. Results are bitwise independent of
    ``workers``; ``chunk_size`` fixes the reduction blocking and is part of
    the reproducibility contract.
    """
    if run_count < 1:
        raise ConfigError("run_count must be >= 1")
    payloads = _payloads(initial, hamiltonian, config, run_count, master_seed, chunk_size)
    results = _execute(payloads, workers)

    n_samples = config.n_samples
    sum_n0 = np.zeros(n_samples)
    sum_n0_sq = np.zeros(n_samples)
    sum_fluct = np.zeros(n_samples)
    sum_wiener = np.zeros(n_samples)
    failed: list[int] = []
    n_ok = 0
    for r in results:  # chunk order is index order
        n_ok += r["n_ok"]
        failed.extend(r["failed"])
        sum_n0 += r["sum_n0"]
        sum_n0_sq += r["sum_n0_sq"]
        sum_fluct += r["sum_fluct"]
        sum_wiener += r["sum_wiener"]
    if n_ok == 0:
        raise ConfigError("every trajectory in the ensemble aborted")

    n0 = n0_diagonal(hamiltonian.basis)
    p0 = initial.probabilities()
    mean0 = float(p0 @ n0)
    fluct0 = float(np.sqrt(max(p0 @ (n0 * n0) - mean0**2, 0.0)))

    mean_n0 = np.concatenate(([mean0], sum_n0 / n_ok))
    mean_fluct = np.concatenate(([fluct0], sum_fluct / n_ok))
    if n_ok > 1:
        var = np.maximum(sum_n0_sq - sum_n0**2 / n_ok, 0.0) / (n_ok - 1)
        std = np.concatenate(([0.0], np.sqrt(var)))
    else:
        std = np.zeros(n_samples + 1)
    mean_wiener = np.concatenate(([0.0], sum_wiener / n_ok))
    times = np.concatenate(([0.0], (1.0 + np.arange(n_samples)) * config.sample_dt))
    mean_current = CURRENT_SIGNAL_GAIN * config.xi * mean_n0 + mean_wiener / config.sample_dt

    basis = hamiltonian.basis
    return EnsembleResult(
        times=times, mean_n0=mean_n0, std_n0=std, mean_current=mean_current,
        mean_n0_fluct=mean_fluct, run_count=n_ok, failed_indices=tuple(failed),
        config=config,
        meta={
            "master_seed": int(master_seed), "requested_runs": run_count,
            "chunk_size": chunk_size, "N": basis.n_total, "M": basis.magnetization,
            "sigma": hamiltonian.sigma, "q_prime": hamiltonian.q_prime,
        },
    )


def run_trajectories(initial: StateVector, hamiltonian: HamiltonianMatrix, config: IntegratorConfig,
                     run_count: int, master_seed: int, *, workers: int = 1,
                     chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[TrajectoryRecord]:
    """Like run_ensemble but returns the individual records (aborted runs are
    skipped). Intended for current-averaging studies at small dimensions."""
    payloads = _payloads(initial, hamiltonian, config, run_count, master_seed,
                         chunk_size, keep_rows=True)
    results = _execute(payloads, workers)
    records = []
    for r in results:
        rows = r["rows"]
        for local, i in enumerate(range(r["lo"], r["hi"])):
            if rows["status"][local] != engine.STATUS_OK:
                continue
            records.append(assemble_record(
                initial, rows["n0_mean"][local], rows["n0_sq"][local], rows["wiener"][local],
                config, hamiltonian, master_seed, i))
    return records


# ---------------------------------------------------------------------------
# ensemble-averaged conditional density matrix (unraveling checks)

@dataclass(frozen=True)
class DensityAverage:
    times: np.ndarray
    means: list       # (dim, dim) complex per sample time
    sem_real: list    # elementwise standard errors of the real part
    sem_imag: list
    run_count: int


def conditional_density_average(initial: StateVector, hamiltonian: HamiltonianMatrix,
                                config: IntegratorConfig, run_count: int, master_seed: int,
                                sample_taus, *, workers: int = 1,
                                chunk_size: int = DEFAULT_CHUNK_SIZE) -> DensityAverage:
    """Average |psi><psi| over the ensemble at the requested times.

    Sample times are rounded to whole record bins. The elementwise standard
    errors make the result directly comparable against the unconditional
    master equation.
    """
    stride_dt = config.sample_dt
    steps = []
    for tau in sample_taus:
        s = int(round(tau / stride_dt)) * config.record_stride
        if s < config.record_stride or s > config.n_steps:
            raise ConfigError(f"sample time {tau} outside the run")
        steps.append(s)
    payloads = _payloads(initial, hamiltonian, config, run_count, master_seed,
                         chunk_size, snapshot_steps=tuple(sorted(set(steps))))
    results = _execute(payloads, workers)
    dim = hamiltonian.dim
    n_ok = sum(r["n_ok"] for r in results)
    if n_ok == 0:
        raise ConfigError("every trajectory in the ensemble aborted")
    means, sem_re, sem_im = [], [], []
    for s in steps:
        tot = np.zeros((dim, dim), dtype=complex)
        re2 = np.zeros((dim, dim))
        im2 = np.zeros((dim, dim))
        for r in results:
            snap = r["snapshots"][s]
            tot += snap["sum_outer"]
            re2 += snap["sum_re2"]
            im2 += snap["sum_im2"]
        mean = tot / n_ok
        if n_ok > 1:
            var_re = np.maximum(re2 - n_ok * mean.real**2, 0.0) / (n_ok - 1)
            var_im = np.maximum(im2 - n_ok * mean.imag**2, 0.0) / (n_ok - 1)
        else:
            var_re = np.zeros((dim, dim))
            var_im = np.zeros((dim, dim))
        means.append(mean)
        sem_re.append(np.sqrt(var_re / n_ok))
        sem_im.append(np.sqrt(var_im / n_ok))
    times = np.array([s * config.dt for s in steps])
    return DensityAverage(times=times, means=means, sem_real=sem_re, sem_imag=sem_im, run_count=n_ok)


# ---------------------------------------------------------------------------
# late-time ladder distribution

@dataclass(frozen=True)
class SteadyStateResult:
    p_k: np.ndarray             # ensemble/time-averaged ladder probabilities
    p_k_stderr: np.ndarray
    counts: np.ndarray          # projective draws per coarse group
    group_edges: list           # k-index groups used for the test
    chi2_stat: float
    dof: int
    p_value: float
    uniform_ok: bool            # chi-square test at the 5% level
    converged: bool             # half-ensemble consistency within 3 sigma
    run_count: int
    failed_indices: tuple
    t_hold: float


def steady_state_distribution(initial: StateVector, hamiltonian: HamiltonianMatrix,
                              config: IntegratorConfig, run_count: int, t_hold: float,
                              master_seed: int, *, window_frac: float = 0.25,
                              n_groups: int = 10, workers: int = 1,
                              chunk_size: int = DEFAULT_CHUNK_SIZE) -> SteadyStateResult:
    """Estimate the late-time ladder distribution P_k and test it for
    uniformity.

    Each run is held for t_hold; P_k is the ensemble average of each
    trajectory's |amplitude|^2 time-averaged over the final ``window_frac``
    of the hold. The uniformity test draws one projective outcome per
    completed run from its final state (the Monte Carlo resolution an
    experiment would face), coarse-grains the ladder into ``n_groups``
    contiguous groups, and applies a Pearson chi-square test at the 5% level.
    Convergence is flagged by comparing the two index halves of the ensemble.
    """
    cfg = IntegratorConfig(dt=config.dt, t_final=t_hold, xi=config.xi,
                           record_stride=config.record_stride)
    acc_from = int((1.0 - window_frac) * cfg.n_steps)
    payloads = _payloads(initial, hamiltonian, cfg, run_count, master_seed,
                         chunk_size, accumulate_from_step=acc_from)
    results = _execute(payloads, workers)

    dim = hamiltonian.dim
    probs_rows = []
    final_rows = []
    indices = []
    failed: list[int] = []
    for r in results:
        ok = r["ok_mask"]
        failed.extend(r["failed"])
        probs_rows.append(r["probs"][ok])
        final_rows.append(r["finals"][ok])
        indices.extend(i for i in range(r["lo"], r["hi"]) if ok[i - r["lo"]])
    probs = np.concatenate(probs_rows, axis=0)
    finals = np.concatenate(final_rows, axis=0)
    n_ok = probs.shape[0]
    if n_ok < 4:
        raise ConfigError("too few completed runs for a distribution estimate")

    p_k = probs.mean(axis=0)
    p_err = probs.std(axis=0, ddof=1) / np.sqrt(n_ok)

    # one projective readout per run, from its final conditional state
    draws = np.empty(n_ok, dtype=np.int64)
    for row, i in enumerate(indices):
        gen = NoiseStream.sampling_generator(master_seed, i)
        p = np.maximum(finals[row], 0.0)
        draws[row] = gen.choice(dim, p=p / p.sum())
    groups = np.array_split(np.arange(dim), min(n_groups, dim))
    counts = np.array([np.isin(draws, g).sum() for g in groups])
    expected = np.array([n_ok * len(g) / dim for g in groups])
    chi2_stat = float(((counts - expected) ** 2 / expected).sum())
    dof = len(groups) - 1
    p_value = float(_chi2.sf(chi2_stat, dof))

    half = n_ok // 2
    pa, pb = probs[:half], probs[half:]
    if half >= 2:
        sa = pa.std(axis=0, ddof=1) / np.sqrt(half)
        sb = pb.std(axis=0, ddof=1) / np.sqrt(n_ok - half)
        denom = np.sqrt(sa**2 + sb**2)
        diff = np.abs(pa.mean(axis=0) - pb.mean(axis=0))
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(denom > 0, diff / denom, np.where(diff > 0, np.inf, 0.0))
        converged = bool(np.max(z) <= 3.0)
    else:
        converged = False

    return SteadyStateResult(
        p_k=p_k, p_k_stderr=p_err, counts=counts,
        group_edges=[(int(g[0]), int(g[-1])) for g in groups],
        chi2_stat=chi2_stat, dof=dof, p_value=p_value,
        uniform_ok=bool(p_value >= 0.05), converged=converged,
        run_count=n_ok, failed_indices=tuple(failed), t_hold=float(t_hold),
    )


# ---------------------------------------------------------------------------
# photocurrent averaging

@dataclass(frozen=True)
class CurrentAverage:
    times: np.ndarray           # bin centers
    mean_current: np.ndarray
    run_count: int
    bin_width: float
    expected_noise_std: float   # Wiener residual per bin, 1/sqrt(R * bin_width)


def average_currents(records: list, bin_width: float) -> CurrentAverage:
    """Average the recorded photocurrents of many runs into coarse bins.

    All records must share the same time grid. The initial sample (which
    carries no noise bin) is dropped before binning; a trailing partial bin
    is discarded.
    """
    if not records:
        raise ConfigError("no records to average")
    t0 = records[0].times
    for r in records[1:]:
        if len(r.times) != len(t0) or not np.array_equal(r.times, t0):
            raise ConfigError("records do not share a common time grid")
    sample_dt = records[0].sample_dt
    k = max(1, int(round(bin_width / sample_dt)))
    actual_width = k * sample_dt
    n_bins = (len(t0) - 1) // k
    if n_bins == 0:
        raise ConfigError("bin width exceeds the record length")
    currents = np.stack([r.current[1:1 + n_bins * k] for r in records])
    binned = currents.reshape(len(records), n_bins, k).mean(axis=2)
    mean_current = binned.mean(axis=0)
    times = t0[1:1 + n_bins * k].reshape(n_bins, k).mean(axis=1)
    r_count = len(records)
    return CurrentAverage(
        times=times, mean_current=mean_current, run_count=r_count,
        bin_width=actual_width,
        expected_noise_std=float(1.0 / np.sqrt(r_count * actual_width)),
    )
