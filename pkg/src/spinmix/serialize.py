"""CSV and JSON output for records, ensembles, spectra, and state tables.

CSV files carry a comment block of ``# key=value`` metadata lines, then an
RFC-4180 style header row and plain numeric rows (UTF-8, comma separated).
Ensembles additionally get a JSON sidecar with the full configuration and
seed, which is what makes a run reproducible from its artifacts alone.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .ensembles import CurrentAverage, EnsembleResult, SteadyStateResult
from .fock import StateVector
from .integrators import TrajectoryRecord

__all__ = [
    "trajectory_to_csv",
    "trajectory_from_csv",
    "ensemble_to_csv",
    "ensemble_sidecar",
    "amplitude_table_rows",
    "write_csv",
    "read_csv",
    "write_json",
]

FLOAT_FMT = "%.17g"


def _format_row(values) -> list[str]:
    return [FLOAT_FMT % v if isinstance(v, float) else str(v) for v in values]


def write_csv(path, header, rows, metadata: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, value in (metadata or {}).items():
            fh.write(f"# {key}={value}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(_format_row(row))


def read_csv(path):
    """Read back a CSV written by this module: (metadata, header, columns)."""
    metadata = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                metadata[key.strip()] = value
            else:
                body.append(line)
    reader = csv.reader(io.StringIO("".join(body)))
    header = next(reader)
    rows = [r for r in reader if r]
    columns = {name: np.array([float(r[i]) for r in rows]) for i, name in enumerate(header)}
    return metadata, header, columns


def write_json(path, payload: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)!r}")


def trajectory_to_csv(record: TrajectoryRecord, path) -> None:
    write_csv(
        path,
        ["tau", "n0_mean", "n0_var", "current", "dW"],
        zip(
            record.times.tolist(), record.n0_mean.tolist(), record.n0_var.tolist(),
            record.current.tolist(), record.wiener.tolist(),
        ),
        metadata=record.metadata(),
    )


def trajectory_from_csv(path) -> TrajectoryRecord:
    meta, _, cols = read_csv(path)
    return TrajectoryRecord(
        times=cols["tau"], n0_mean=cols["n0_mean"], n0_var=cols["n0_var"],
        current=cols["current"], wiener=cols["dW"],
        seed=int(meta["seed"]), trajectory_index=int(meta["trajectory_index"]),
        xi=float(meta["xi"]), dt=float(meta["dt"]), record_stride=int(meta["record_stride"]),
        n_total=int(meta["N"]), magnetization=int(meta["M"]),
        sigma=int(meta["sigma"]), q_prime=float(meta["q_prime"]),
    )


def ensemble_to_csv(result: EnsembleResult, path) -> None:
    write_csv(
        path,
        ["tau", "mean_n0", "std_n0", "mean_current", "mean_n0_fluct"],
        zip(
            result.times.tolist(), result.mean_n0.tolist(), result.std_n0.tolist(),
            result.mean_current.tolist(), result.mean_n0_fluct.tolist(),
        ),
        metadata={"run_count": result.run_count, **result.meta},
    )


def ensemble_sidecar(result: EnsembleResult) -> dict:
    cfg = result.config
    return {
        "run_count": result.run_count,
        "failed_indices": list(result.failed_indices),
        "config": {
            "dt": cfg.dt, "t_final": cfg.t_final, "xi": cfg.xi,
            "record_stride": cfg.record_stride,
        },
        "meta": result.meta,
        "summary": {
            "mean_n0_final": float(result.mean_n0[-1]),
            "mean_n0_overall": float(result.mean_n0.mean()),
            "std_n0_final": float(result.std_n0[-1]),
        },
    }


def amplitude_table_rows(state: StateVector):
    """(k, N_plus, N_0, N_minus, amplitude) rows of a sector state; the
    amplitude column is the real part under the fixed phase conventions."""
    rows = []
    for i, (np_, n0_, nm_) in enumerate(state.basis.states):
        amp = state.amplitudes[i]
        rows.append((i, np_, n0_, nm_, float(amp.real)))
    return rows


def steady_state_payload(result: SteadyStateResult) -> dict:
    return {
        "p_k": result.p_k, "p_k_stderr": result.p_k_stderr,
        "counts": result.counts, "group_edges": result.group_edges,
        "chi2_stat": result.chi2_stat, "dof": result.dof, "p_value": result.p_value,
        "uniform_ok": result.uniform_ok, "converged": result.converged,
        "run_count": result.run_count, "failed_indices": list(result.failed_indices),
        "t_hold": result.t_hold,
    }


def current_average_to_csv(avg: CurrentAverage, path) -> None:
    write_csv(
        path,
        ["tau", "mean_current"],
        zip(avg.times.tolist(), avg.mean_current.tolist()),
        metadata={
            "run_count": avg.run_count, "bin_width": avg.bin_width,
            "expected_noise_std": avg.expected_noise_std,
        },
    )
