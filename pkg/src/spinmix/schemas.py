"""Request/response models of the HTTP service and the job-file schema.

The same models validate configuration files on the client side, so a recipe
that passes the CLI's strict schema is exactly what the service accepts.
Unknown keys are rejected everywhere to keep published run recipes
unambiguous.
"""

from __future__ import annotations

import re

from pydantic import BaseModel, ConfigDict, Field, field_validator

INITIAL_STATE_PATTERN = re.compile(r"^(afm_ground|fm_ground_m0|all_zero_component|fock:\d+)$")


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


def _check_sigma(v: int) -> int:
    if v not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    return v


def _check_initial_state(v: str) -> str:
    if not INITIAL_STATE_PATTERN.match(v):
        raise ValueError(
            "initial_state must be one of afm_ground, fm_ground_m0, "
            "all_zero_component, fock:<index>"
        )
    return v


class SimulateRequest(StrictModel):
    """One conditional run."""

    N: int = Field(ge=1)
    M: int = 0
    sigma: int = 1
    q_prime: float = 0.0
    xi: float = Field(ge=0.0)
    dt: float | None = Field(default=None, gt=0.0)
    t_final: float = Field(gt=0.0)
    seed: int = 0
    trajectory_index: int = Field(default=0, ge=0)
    record_stride: int = Field(default=10, ge=1)
    initial_state: str = "afm_ground"

    _sigma = field_validator("sigma")(_check_sigma)
    _init = field_validator("initial_state")(_check_initial_state)


class SimulateResponse(StrictModel):
    status: str  # "ok" | "aborted"
    detail: str | None = None
    times: list[float]
    n0_mean: list[float]
    n0_var: list[float]
    current: list[float]
    wiener: list[float]
    meta: dict


class EnsembleRequest(SimulateRequest):
    runs: int = Field(ge=1)
    workers: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=64, ge=1)


class EnsembleResponse(StrictModel):
    status: str  # "ok" | "partial"
    times: list[float]
    mean_n0: list[float]
    std_n0: list[float]
    mean_current: list[float]
    mean_n0_fluct: list[float]
    run_count: int
    failed_indices: list[int]
    meta: dict


class SteadyStateRequest(StrictModel):
    N: int = Field(ge=1)
    M: int = 0
    sigma: int = 1
    q_prime: float = 0.0
    xi: float = Field(ge=0.0)
    dt: float | None = Field(default=None, gt=0.0)
    t_hold: float = Field(gt=0.0)
    runs: int = Field(ge=4)
    seed: int = 0
    record_stride: int = Field(default=100, ge=1)
    initial_state: str = "all_zero_component"
    window_frac: float = Field(default=0.25, gt=0.0, le=1.0)
    n_groups: int = Field(default=10, ge=2)
    workers: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=64, ge=1)

    _sigma = field_validator("sigma")(_check_sigma)
    _init = field_validator("initial_state")(_check_initial_state)


class SteadyStateResponse(StrictModel):
    status: str
    p_k: list[float]
    p_k_stderr: list[float]
    counts: list[int]
    group_edges: list[tuple[int, int]]
    chi2_stat: float
    dof: int
    p_value: float
    uniform_ok: bool
    converged: bool
    run_count: int
    failed_indices: list[int]
    t_hold: float
    meta: dict


class GroundStateRequest(StrictModel):
    N: int = Field(ge=1)
    sigma: int = 1
    m: int = 0  # manifold index, ferromagnetic case only

    _sigma = field_validator("sigma")(_check_sigma)


class AmplitudeRow(StrictModel):
    k: int
    N_plus: int
    N_0: int
    N_minus: int
    amplitude: float


class GroundStateResponse(StrictModel):
    N: int
    sigma: int
    m: int
    magnetization: int
    energy: float
    n0_mean: float
    n0_fluct: float
    rows: list[AmplitudeRow]


class SpectrumRequest(StrictModel):
    times: list[float]
    values: list[float]
    window: str = "none"

    @field_validator("window")
    @classmethod
    def _window(cls, v):
        if v not in ("none", "hann"):
            raise ValueError("window must be 'none' or 'hann'")
        return v


class SpectrumResponse(StrictModel):
    frequencies: list[float]
    magnitudes: list[float]
    peaks: list[tuple[float, float]]


class ParamsRequest(StrictModel):
    """Laboratory parameters in ordinary frequency units (Hz)."""

    kappa: float = Field(gt=0.0)
    g0: float
    lam: float = Field(alias="lambda")
    eta: float
    delta_pa: float
    q: float = 0.0

    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class ParamsResponse(StrictModel):
    xi: float
    q_prime: float
    alpha: float
    u0: float
    sigma: int
    flags: dict
    regime_ok: bool


class BlochRequest(StrictModel):
    sigma: int = 1
    xi: float = Field(ge=0.0)
    dt: float = Field(default=1e-3, gt=0.0)
    t_final: float = Field(gt=0.0)
    seed: int = 0
    trajectory_index: int = Field(default=0, ge=0)
    s_x0: float = 0.0
    s_y0: float = 0.0
    s_z0: float = 1.0
    record_stride: int = Field(default=10, ge=1)

    _sigma = field_validator("sigma")(_check_sigma)


class BlochResponse(StrictModel):
    times: list[float]
    s_x: list[float]
    s_y: list[float]
    s_z: list[float]


class HealthResponse(StrictModel):
    status: str
    version: str


# --- client-side job files -------------------------------------------------

class OutputPaths(StrictModel):
    output_csv: str | None = None
    output_json: str | None = None


class SimulateJob(SimulateRequest, OutputPaths):
    runs: int = Field(default=1, ge=1)  # accepted for schema symmetry; must stay 1


class EnsembleJob(EnsembleRequest, OutputPaths):
    pass


class SteadyStateJob(SteadyStateRequest, OutputPaths):
    pass


class ParamsJob(ParamsRequest, OutputPaths):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)
