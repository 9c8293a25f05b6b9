"""Batched fixed-step integration kernel for the nonlinear diffusive unraveling.

One compiled kernel advances a chunk of trajectories through a segment of
steps. Each trajectory is processed strictly sequentially by its own loop
iterations, so its floating-point result is bit-for-bit independent of which
chunk it lands in and of how many trajectories share the call. That property
is what makes ensemble output reproducible for any worker count.

Scheme per step (scaled time, Ito interpretation):
  1. deterministic drift  (-i H - xi^2 (N0 - <N0>)^2) |psi>  advanced with the
     classical 4-stage Runge-Kutta rule, <N0> re-evaluated at every stage;
  2. diffusion kick  sqrt(2) xi (N0 - <N0>) |psi> dW  applied Euler-Maruyama
     style at the drift-advanced state;
  3. explicit renormalization.

A row whose norm falls below ``NORM_FLOOR`` before renormalization is marked
failed and skipped for the rest of the run; its remaining samples are NaN.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .noise import NoiseStream

__all__ = ["BatchOutputs", "integrate_sse_batch", "NORM_FLOOR", "STATUS_OK", "STATUS_NORM_COLLAPSE"]

NORM_FLOOR = 1e-6
STATUS_OK = 0
STATUS_NORM_COLLAPSE = 1

DEFAULT_SEGMENT_STEPS = 8192


@njit(cache=True)
def _sse_segment(psi, status, fail_step, d, e, n0, xi, dt, noise, base_step,
                 stride, out_n0, out_n0sq, out_w, sample_base,
                 acc_probs, acc_start_sample):
    """Advance every live row of ``psi`` through ``noise.shape[1]`` steps."""
    n_rows, dim = psi.shape
    n_steps = noise.shape[1]
    xi2 = xi * xi
    sq2xi = np.sqrt(2.0) * xi
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    y = np.empty(dim, dtype=np.complex128)
    for c in range(n_rows):
        if status[c] != STATUS_OK:
            continue
        ps = psi[c]
        wsum = 0.0
        sample = sample_base
        failed = False
        for s in range(n_steps):
            for stage in range(4):
                if stage == 0:
                    src = ps
                elif stage == 1:
                    for j in range(dim):
                        y[j] = ps[j] + (0.5 * dt) * k1[j]
                    src = y
                elif stage == 2:
                    for j in range(dim):
                        y[j] = ps[j] + (0.5 * dt) * k2[j]
                    src = y
                else:
                    for j in range(dim):
                        y[j] = ps[j] + dt * k3[j]
                    src = y
                sp = 0.0
                sn = 0.0
                for j in range(dim):
                    pj = src[j].real * src[j].real + src[j].imag * src[j].imag
                    sp += pj
                    sn += pj * n0[j]
                mean = sn / sp
                if stage == 0:
                    dst = k1
                elif stage == 1:
                    dst = k2
                elif stage == 2:
                    dst = k3
                else:
                    dst = k4
                for j in range(dim):
                    acc = d[j] * src[j]
                    if j > 0:
                        acc += e[j - 1] * src[j - 1]
                    if j < dim - 1:
                        acc += e[j] * src[j + 1]
                    dlt = n0[j] - mean
                    dst[j] = -1j * acc - (xi2 * dlt * dlt) * src[j]
            for j in range(dim):
                ps[j] = ps[j] + (dt / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            # diffusion kick at the drift-advanced state, then renormalize
            sp = 0.0
            sn = 0.0
            for j in range(dim):
                pj = ps[j].real * ps[j].real + ps[j].imag * ps[j].imag
                sp += pj
                sn += pj * n0[j]
            mean = sn / sp
            dw = noise[c, s]
            a = sq2xi * dw
            nrm2 = 0.0
            for j in range(dim):
                ps[j] = ps[j] * (1.0 + a * (n0[j] - mean))
                nrm2 += ps[j].real * ps[j].real + ps[j].imag * ps[j].imag
            nrm = np.sqrt(nrm2)
            if not (nrm > NORM_FLOOR):
                status[c] = STATUS_NORM_COLLAPSE
                fail_step[c] = base_step + s
                failed = True
                break
            inv = 1.0 / nrm
            for j in range(dim):
                ps[j] *= inv
            wsum += dw
            if (s + 1) % stride == 0:
                sn = 0.0
                snn = 0.0
                for j in range(dim):
                    pj = ps[j].real * ps[j].real + ps[j].imag * ps[j].imag
                    sn += pj * n0[j]
                    snn += pj * n0[j] * n0[j]
                out_n0[c, sample] = sn
                out_n0sq[c, sample] = snn
                out_w[c, sample] = wsum
                if acc_start_sample >= 0 and sample >= acc_start_sample:
                    for j in range(dim):
                        acc_probs[c, j] += ps[j].real * ps[j].real + ps[j].imag * ps[j].imag
                wsum = 0.0
                sample += 1
        if failed:
            for sm in range(sample, out_n0.shape[1]):
                out_n0[c, sm] = np.nan
                out_n0sq[c, sm] = np.nan
                out_w[c, sm] = np.nan


class BatchOutputs:
    """Arrays produced by one batched run.

    Sample i corresponds to global step (i + 1) * stride; the initial state
    is not included here (callers prepend it). ``wiener[c, i]`` is the sum of
    the trajectory's increments over that stride bin.
    """

    def __init__(self, n_rows, n_samples, dim):
        self.n0_mean = np.empty((n_rows, n_samples))
        self.n0_sq = np.empty((n_rows, n_samples))
        self.wiener = np.empty((n_rows, n_samples))
        self.status = np.zeros(n_rows, dtype=np.int64)
        self.fail_step = np.full(n_rows, -1, dtype=np.int64)
        self.probs_acc = np.zeros((n_rows, dim))
        self.probs_samples = 0
        self.snapshots: dict[int, np.ndarray] = {}
        self.final = None  # (n_rows, dim) complex, set by the driver

    @property
    def failed_rows(self) -> np.ndarray:
        return np.flatnonzero(self.status != STATUS_OK)


def integrate_sse_batch(initial, hamiltonian, n0, xi, dt, n_steps, stride,
                        streams, *, accumulate_from_step: int | None = None,
                        snapshot_steps=(), segment_steps: int = DEFAULT_SEGMENT_STEPS) -> BatchOutputs:
    """Integrate one chunk of trajectories sharing an initial state.

    Parameters
    ----------
    initial : (dim,) complex amplitudes shared by all rows.
    hamiltonian : HamiltonianMatrix for the sector.
    n0 : measured-observable diagonal for the sector.
    xi, dt, n_steps, stride : integration parameters; n_steps must be a
        multiple of stride.
    streams : sequence of NoiseStream, one per row; each supplies exactly
        n_steps increments regardless of segmentation.
    accumulate_from_step : if set, time-average |amplitude|^2 over every
        sample step >= this global step (used for late-time distributions).
    snapshot_steps : global step indices (multiples of stride) at which to
        copy the full amplitude chunk.
    """
    if n_steps % stride != 0:
        raise ValueError("n_steps must be a multiple of record_stride")
    snapshot_steps = sorted(set(int(s) for s in snapshot_steps))
    for s in snapshot_steps:
        if s <= 0 or s > n_steps or s % stride != 0:
            raise ValueError(f"snapshot step {s} must be a positive multiple of the stride within the run")
    dim = len(n0)
    n_rows = len(streams)
    amps0 = np.asarray(initial, dtype=np.complex128).reshape(dim)
    psi = np.tile(amps0, (n_rows, 1))
    d = np.ascontiguousarray(hamiltonian.diagonal, dtype=np.float64)
    e = np.ascontiguousarray(hamiltonian.off_diagonal, dtype=np.float64)
    n0c = np.ascontiguousarray(n0, dtype=np.float64)
    n_samples = n_steps // stride
    out = BatchOutputs(n_rows, n_samples, dim)

    if accumulate_from_step is None:
        acc_start_sample = -1
    else:
        # first sample index whose global step is >= accumulate_from_step
        acc_start_sample = max(0, -(-int(accumulate_from_step) // stride) - 1)

    # segment boundaries: multiples of stride, split at snapshot steps
    seg = max(stride, (segment_steps // stride) * stride)
    boundaries = set(range(seg, n_steps, seg)) | set(snapshot_steps) | {n_steps}
    edges = [0] + sorted(boundaries)
    sqrt_dt = np.sqrt(dt)
    for a, b in zip(edges[:-1], edges[1:]):
        length = b - a
        noise = np.empty((n_rows, length))
        for c, stream in enumerate(streams):
            noise[c] = stream.standard_normals(length)
        noise *= sqrt_dt
        _sse_segment(psi, out.status, out.fail_step, d, e, n0c, float(xi), float(dt),
                     noise, a, stride, out.n0_mean, out.n0_sq, out.wiener,
                     a // stride, out.probs_acc, acc_start_sample)
        if b in snapshot_steps:
            out.snapshots[b] = psi.copy()
    if acc_start_sample >= 0:
        out.probs_samples = n_samples - acc_start_sample
    out.final = psi
    return out
