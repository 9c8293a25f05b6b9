"""HTTP service exposing the simulator operations.

Every endpoint wraps one core operation behind the request/response models in
``schemas``. The CLI is a thin client of this app (in-process by default),
and ``uvicorn spinmix.service:app`` serves the same surface over the network.

Computation failures are reported in-band: a single run that aborts returns
status "aborted" (the request itself succeeded), and an ensemble with failed
trajectories returns status "partial" together with the failed indices.
Invalid parameters are HTTP 422.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from . import __version__, schemas
from .analysis import fourier_spectrum
from .bloch import BlochState, run_bloch
from .ensembles import (
    PhysicalParams,
    derive_dimensionless,
    run_ensemble,
    steady_state_distribution,
)
from .fock import SectorBasis, SectorError, StateVector, build_hamiltonian, build_sector, expectation, n0_diagonal
from .groundstates import afm_ground_state, fm_ground_manifold, spectrum
from .integrators import ConfigError, IntegratorConfig, TrajectoryAbort, run_trajectory
from .noise import NoiseStream
from .serialize import amplitude_table_rows

DEFAULT_DT = 1e-4
GAP_SAFETY = 0.09  # stay below the dt * gap < 0.1 limit with margin


def resolve_initial_state(basis: SectorBasis, label: str) -> StateVector:
    """Map a config label to a state in the given sector."""
    if label == "afm_ground":
        if basis.magnetization != 0:
            raise ConfigError("afm_ground requires the M = 0 sector")
        return afm_ground_state(basis.n_total)
    if label == "fm_ground_m0":
        if basis.magnetization != 0:
            raise ConfigError("fm_ground_m0 requires the M = 0 sector")
        return fm_ground_manifold(basis.n_total, 0)
    if label == "all_zero_component":
        if basis.magnetization != 0:
            raise ConfigError("all_zero_component requires the M = 0 sector")
        return basis.basis_state(0)
    if label.startswith("fock:"):
        index = int(label.split(":", 1)[1])
        if index >= basis.dim:
            raise ConfigError(f"fock index {index} outside sector of dimension {basis.dim}")
        return basis.basis_state(index)
    raise ConfigError(f"unknown initial_state {label!r}")


def default_dt(hamiltonian) -> float:
    gap = hamiltonian.max_adjacent_gap()
    if gap <= 0:
        return DEFAULT_DT
    return min(DEFAULT_DT, GAP_SAFETY / gap)


def _setup(req) -> tuple:
    basis = build_sector(req.N, req.M)
    h = build_hamiltonian(basis, req.sigma, req.q_prime)
    dt = req.dt if req.dt is not None else default_dt(h)
    initial = resolve_initial_state(basis, req.initial_state)
    return basis, h, dt, initial


def create_app() -> FastAPI:
    app = FastAPI(title="spinmix", version=__version__)

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        try:
            _, h, dt, initial = _setup(req)
            config = IntegratorConfig(dt=dt, t_final=req.t_final, xi=req.xi,
                                      record_stride=req.record_stride)
            record = run_trajectory(initial, h, config, NoiseStream(req.seed, req.trajectory_index))
        except (ConfigError, SectorError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except TrajectoryAbort as exc:
            return schemas.SimulateResponse(
                status="aborted", detail=str(exc), times=[], n0_mean=[], n0_var=[],
                current=[], wiener=[], meta={"dt": dt},
            )
        return schemas.SimulateResponse(
            status="ok", times=record.times.tolist(), n0_mean=record.n0_mean.tolist(),
            n0_var=record.n0_var.tolist(), current=record.current.tolist(),
            wiener=record.wiener.tolist(), meta=record.metadata(),
        )

    @app.post("/ensemble", response_model=schemas.EnsembleResponse)
    def ensemble(req: schemas.EnsembleRequest):
        try:
            _, h, dt, initial = _setup(req)
            config = IntegratorConfig(dt=dt, t_final=req.t_final, xi=req.xi,
                                      record_stride=req.record_stride)
            result = run_ensemble(initial, h, config, req.runs, req.seed,
                                  workers=req.workers, chunk_size=req.chunk_size)
        except (ConfigError, SectorError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.EnsembleResponse(
            status="ok" if result.complete else "partial",
            times=result.times.tolist(), mean_n0=result.mean_n0.tolist(),
            std_n0=result.std_n0.tolist(), mean_current=result.mean_current.tolist(),
            mean_n0_fluct=result.mean_n0_fluct.tolist(),
            run_count=result.run_count, failed_indices=list(result.failed_indices),
            meta={**result.meta, "dt": dt, "t_final": req.t_final,
                  "record_stride": req.record_stride},
        )

    @app.post("/steadystate", response_model=schemas.SteadyStateResponse)
    def steadystate(req: schemas.SteadyStateRequest):
        try:
            basis = build_sector(req.N, req.M)
            h = build_hamiltonian(basis, req.sigma, req.q_prime)
            dt = req.dt if req.dt is not None else default_dt(h)
            initial = resolve_initial_state(basis, req.initial_state)
            config = IntegratorConfig(dt=dt, t_final=req.t_hold, xi=req.xi,
                                      record_stride=req.record_stride)
            result = steady_state_distribution(
                initial, h, config, req.runs, req.t_hold, req.seed,
                window_frac=req.window_frac, n_groups=req.n_groups,
                workers=req.workers, chunk_size=req.chunk_size)
        except (ConfigError, SectorError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.SteadyStateResponse(
            status="ok" if not result.failed_indices else "partial",
            p_k=result.p_k.tolist(), p_k_stderr=result.p_k_stderr.tolist(),
            counts=result.counts.tolist(), group_edges=result.group_edges,
            chi2_stat=result.chi2_stat, dof=result.dof, p_value=result.p_value,
            uniform_ok=result.uniform_ok, converged=result.converged,
            run_count=result.run_count, failed_indices=list(result.failed_indices),
            t_hold=result.t_hold,
            meta={"N": req.N, "M": req.M, "sigma": req.sigma, "q_prime": req.q_prime,
                  "xi": req.xi, "dt": dt, "seed": req.seed},
        )

    @app.post("/groundstate", response_model=schemas.GroundStateResponse)
    def groundstate(req: schemas.GroundStateRequest):
        try:
            if req.sigma == 1:
                if req.m != 0:
                    raise ConfigError("m must be 0 for the antiferromagnetic ground state")
                state = afm_ground_state(req.N)
            else:
                state = fm_ground_manifold(req.N, req.m)
            basis = state.basis
            spec = spectrum(basis, req.sigma, 0.0)
            n0 = n0_diagonal(basis)
            mean = expectation(state, n0)
            fluct = (max(expectation(state, n0 * n0) - mean**2, 0.0)) ** 0.5
        except (ConfigError, SectorError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.GroundStateResponse(
            N=req.N, sigma=req.sigma, m=req.m, magnetization=basis.magnetization,
            energy=float(spec.eigenvalues[0]), n0_mean=mean, n0_fluct=fluct,
            rows=[schemas.AmplitudeRow(k=k, N_plus=a, N_0=b, N_minus=c, amplitude=amp)
                  for k, a, b, c, amp in amplitude_table_rows(state)],
        )

    @app.post("/spectrum", response_model=schemas.SpectrumResponse)
    def spectrum_endpoint(req: schemas.SpectrumRequest):
        try:
            trace = fourier_spectrum(req.times, req.values, window=req.window)
        except (ConfigError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.SpectrumResponse(
            frequencies=trace.frequencies.tolist(), magnitudes=trace.magnitudes.tolist(),
            peaks=[(f, m) for f, m in trace.peaks],
        )

    @app.post("/params", response_model=schemas.ParamsResponse)
    def params(req: schemas.ParamsRequest):
        try:
            derived = derive_dimensionless(PhysicalParams(
                kappa=req.kappa, g0=req.g0, lam=req.lam, eta=req.eta,
                delta_pa=req.delta_pa, q=req.q))
        except ConfigError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.ParamsResponse(
            xi=derived.xi, q_prime=derived.q_prime, alpha=derived.alpha,
            u0=derived.u0, sigma=derived.sigma, flags=derived.flags,
            regime_ok=derived.regime_ok,
        )

    @app.post("/bloch2", response_model=schemas.BlochResponse)
    def bloch2(req: schemas.BlochRequest):
        n_steps = max(1, int(round(req.t_final / req.dt)))
        dws = NoiseStream(req.seed, req.trajectory_index).increments(n_steps, req.dt)
        path = run_bloch(BlochState(req.s_x0, req.s_y0, req.s_z0),
                         req.sigma, req.xi, req.dt, n_steps, dws)
        stride = req.record_stride
        idx = np.arange(0, n_steps + 1, stride)
        times = idx * req.dt
        return schemas.BlochResponse(
            times=times.tolist(), s_x=path[idx, 0].tolist(),
            s_y=path[idx, 1].tolist(), s_z=path[idx, 2].tolist(),
        )

    return app


app = create_app()
