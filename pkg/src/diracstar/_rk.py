"""Compiled adaptive DOP853 kernel for the edge transfer systems.

Three right-hand sides share one stepper:

* mode 0: fundamental matrix ``Y' = J(z - V) Y - sigma Y`` (4 complex entries),
* mode 1: ``Y`` together with ``Ydot' = J(z - V) Ydot + J Y - sigma Ydot`` (8 entries),
* mode 2: Pruefer angle ``theta' = z - p cos(2 theta) - q sin(2 theta)`` (real z).

The kernel is compiled separately for complex state (complex ``z``) and real
state (real ``z``, where ``Y`` is real).  The state is stored row-major:
``(Y00, Y01, Y10, Y11[, D00, D01, D10, D11])``.
The potential is linear on every segment between consecutive stops, so the
integration never crosses a knot inside a step.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.integrate import DOP853 as _DOP853

_A = np.ascontiguousarray(_DOP853.A, dtype=np.float64)
_B = np.ascontiguousarray(_DOP853.B, dtype=np.float64)
_C = np.ascontiguousarray(_DOP853.C, dtype=np.float64)
_E3 = np.ascontiguousarray(_DOP853.E3, dtype=np.float64)
_E5 = np.ascontiguousarray(_DOP853.E5, dtype=np.float64)
_N_STAGES = int(_DOP853.n_stages)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
MAX_STEPS = 2_000_000

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_TOO_MANY_STEPS = 2
STATUS_NONFINITE = 3


@njit(cache=True)
def _rhs(mode, x, y, z, sigma, x0, p0, dp, q0, dq, out):
    p = p0 + dp * (x - x0)
    q = q0 + dq * (x - x0)
    if mode == 2:
        th = y[0].real
        out[0] = z.real - p * np.cos(2.0 * th) - q * np.sin(2.0 * th)
        return
    a00 = q - sigma
    a01 = -z - p
    a10 = z - p
    a11 = -q - sigma
    # Y' = A Y, columns independent
    out[0] = a00 * y[0] + a01 * y[2]
    out[1] = a00 * y[1] + a01 * y[3]
    out[2] = a10 * y[0] + a11 * y[2]
    out[3] = a10 * y[1] + a11 * y[3]
    if mode == 1:
        # Ydot' = A Ydot + J Y, J Y = [[-Y10, -Y11], [Y00, Y01]]
        out[4] = a00 * y[4] + a01 * y[6] - y[2]
        out[5] = a00 * y[5] + a01 * y[7] - y[3]
        out[6] = a10 * y[4] + a11 * y[6] + y[0]
        out[7] = a10 * y[5] + a11 * y[7] + y[1]


@njit(cache=True)
def integrate(mode, stops, seg_x0, seg_p0, seg_dp, seg_q0, seg_dq, record,
              y0, z, sigma, rtol, atol, hmax_scale):
    """Integrate across ``stops`` and return the state at every recorded stop.

    Parameters
    ----------
    stops : increasing array, ``stops[0]`` is the start point.
    seg_* : linear potential coefficients on ``[stops[i], stops[i+1]]``.
    record : bool array, ``record[i]`` keeps the state at ``stops[i]``.
    hmax_scale : if positive, steps are capped at ``1 / hmax_scale``.

    Returns
    -------
    (states, status, fail_x, nsteps)
    """
    n = y0.size
    nrec = 0
    for i in range(stops.size):
        if record[i]:
            nrec += 1
    states = np.zeros((nrec, n), dtype=y0.dtype)
    k = np.zeros((_N_STAGES + 1, n), dtype=y0.dtype)
    y = y0.copy()
    ynew = np.empty(n, dtype=y0.dtype)
    tmp = np.empty(n, dtype=y0.dtype)
    f = np.empty(n, dtype=y0.dtype)
    irec = 0
    if record[0]:
        states[irec, :] = y
        irec += 1
    span = stops[-1] - stops[0]
    h = 0.0
    nsteps = 0
    hcap = np.inf
    if hmax_scale > 0.0:
        hcap = 1.0 / hmax_scale
    err_exp = -1.0 / 8.0
    for i in range(stops.size - 1):
        xa = stops[i]
        xb = stops[i + 1]
        x0s = seg_x0[i]
        p0 = seg_p0[i]
        dp = seg_dp[i]
        q0 = seg_q0[i]
        dq = seg_dq[i]
        x = xa
        _rhs(mode, x, y, z, sigma, x0s, p0, dp, q0, dq, f)
        if h <= 0.0:
            # crude initial step from the size of the derivative
            sc = 0.0
            fn = 0.0
            for j in range(n):
                s = atol + abs(y[j]) * rtol
                sc += (abs(y[j]) / s) ** 2
                fn += (abs(f[j]) / s) ** 2
            sc = np.sqrt(sc / n)
            fn = np.sqrt(fn / n)
            if sc < 1e-5 or fn < 1e-5:
                h = 1e-6
            else:
                h = 0.01 * sc / fn
            h = min(h, hcap)
        while x < xb:
            if nsteps >= MAX_STEPS:
                return states, STATUS_TOO_MANY_STEPS, x, nsteps
            hmin = 10.0 * np.finfo(np.float64).eps * max(abs(x), span, 1.0)
            h = min(h, hcap)
            hprop = h
            last = False
            if x + h >= xb - hmin:
                h = xb - x
                last = True
            if h < hmin and not last:
                return states, STATUS_UNDERFLOW, x, nsteps
            # stages
            for j in range(n):
                k[0, j] = f[j]
            for s in range(1, _N_STAGES):
                for j in range(n):
                    acc = 0.0 * y[0]
                    for r in range(s):
                        acc += _A[s, r] * k[r, j]
                    tmp[j] = y[j] + h * acc
                _rhs(mode, x + _C[s] * h, tmp, z, sigma, x0s, p0, dp, q0, dq, k[s])
            for j in range(n):
                acc = 0.0 * y[0]
                for r in range(_N_STAGES):
                    acc += _B[r] * k[r, j]
                ynew[j] = y[j] + h * acc
            _rhs(mode, x + h, ynew, z, sigma, x0s, p0, dp, q0, dq, k[_N_STAGES])
            e5 = 0.0
            e3 = 0.0
            finite = True
            for j in range(n):
                s = atol + rtol * max(abs(y[j]), abs(ynew[j]))
                a5 = 0.0 * y[0]
                a3 = 0.0 * y[0]
                for r in range(_N_STAGES + 1):
                    a5 += _E5[r] * k[r, j]
                    a3 += _E3[r] * k[r, j]
                e5 += (abs(a5) / s) ** 2
                e3 += (abs(a3) / s) ** 2
                if not np.isfinite(abs(ynew[j])):
                    finite = False
            nsteps += 1
            if not finite:
                if h <= hmin * 2.0:
                    return states, STATUS_NONFINITE, x, nsteps
                h *= 0.1
                continue
            denom = e5 + 0.01 * e3
            if denom > 0.0:
                err = abs(h) * e5 / np.sqrt(denom * n)
            else:
                err = 0.0
            if err < 1.0:
                if err == 0.0:
                    factor = MAX_FACTOR
                else:
                    factor = min(MAX_FACTOR, SAFETY * err ** err_exp)
                if last:
                    x = xb
                else:
                    x = x + h
                for j in range(n):
                    y[j] = ynew[j]
                    f[j] = k[_N_STAGES, j]
                if not last:
                    h *= factor
                else:
                    # carry the untruncated step into the next segment
                    h = max(hprop, h * factor)
            else:
                h *= max(MIN_FACTOR, SAFETY * err ** err_exp)
        if record[i + 1]:
            states[irec, :] = y
            irec += 1
    return states, STATUS_OK, stops[-1], nsteps
