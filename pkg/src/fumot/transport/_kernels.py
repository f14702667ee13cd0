"""
Compiled ray-integration kernels.

Every kernel walks the backward ray of each (direction, active node) pair.
Samples sit at ``x - n*step*v`` for ``n = 0..m`` followed by the boundary
point ``x - tau*v``. Off-node values come from bilinear interpolation of the
lattice fields. Attenuation uses cumulative trapezoid sums; the source path
integral uses the composite Simpson weights of :func:`_qweight`.

The outer loop runs over directions with ``prange``; each direction writes only
its own output slice so results do not depend on the thread count.
"""
import numpy as np
from numba import config, njit, prange

# TBB is frequently too old on stock images; prefer OpenMP, then the
# built-in work queue. An explicit NUMBA_THREADING_LAYER still wins.
if config.THREADING_LAYER == "default":
    config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@njit(cache=True)
def _cell(a, b, nx, ny):
    """Lower-left lattice index and fractional offsets of lattice coordinate ``(a, b)``."""
    ia = int(a) if a >= 0.0 else -1
    ib = int(b) if b >= 0.0 else -1
    if ia < 0:
        ia = 0
    elif ia > nx - 2:
        ia = nx - 2
    if ib < 0:
        ib = 0
    elif ib > ny - 2:
        ib = ny - 2
    fa = a - ia
    fb = b - ib
    if fa < 0.0:
        fa = 0.0
    elif fa > 1.0:
        fa = 1.0
    if fb < 0.0:
        fb = 0.0
    elif fb > 1.0:
        fb = 1.0
    return ia, ib, fa, fb


@njit(cache=True)
def _gather(f, ia, ib, fa, fb):
    return ((1.0 - fa) * (1.0 - fb) * f[ia, ib] + fa * (1.0 - fb) * f[ia + 1, ib]
            + (1.0 - fa) * fb * f[ia, ib + 1] + fa * fb * f[ia + 1, ib + 1])


@njit(cache=True)
def _spread(out, ia, ib, fa, fb, val):
    out[ia, ib] += (1.0 - fa) * (1.0 - fb) * val
    out[ia + 1, ib] += fa * (1.0 - fb) * val
    out[ia, ib + 1] += (1.0 - fa) * fb * val
    out[ia + 1, ib + 1] += fa * fb * val


@njit(cache=True)
def _qweight(n, m, r, step):
    """Composite Simpson weight of sample ``n`` (see ``grid.path_weights``)."""
    w = 0.0
    me = m - (m % 2)
    if me >= 2 and n <= me:
        if n == 0 or n == me:
            w += step / 3.0
        elif n % 2 == 1:
            w += 4.0 * step / 3.0
        else:
            w += 2.0 * step / 3.0
    if m % 2 == 1 and (n == m - 1 or n == m):
        w += 0.5 * step
    if n == m:
        w += 0.5 * r
    return w


@njit(cache=True)
def _split(tau, step):
    m = int(np.floor(tau / step + 1e-10))
    r = tau - m * step
    if r < 0.0:
        r = 0.0
    return m, r


@njit(parallel=True, cache=True)
def sample_counts(tau, step):
    M, na = tau.shape
    out = np.empty((M, na), dtype=np.int64)
    for k in prange(M):
        for a in range(na):
            m, r = _split(tau[k, a], step)
            out[k, a] = m + 2
    return out


@njit(parallel=True, cache=True)
def build_table(sig, x0, y0, h, nx, ny, dirs, active, tau, step, ptr, wtab, atten):
    """Store ``weight * exp(-D)`` for every sample and the boundary attenuation."""
    M = dirs.shape[0]
    na = active.shape[0]
    for k in prange(M):
        vx = dirs[k, 0]
        vy = dirs[k, 1]
        ca = vx * step / h
        cb = vy * step / h
        for a in range(na):
            node = active[a]
            ai = float(node // ny)
            bi = float(node % ny)
            t = tau[k, a]
            m, r = _split(t, step)
            base = ptr[k * na + a]
            D = 0.0
            sp = 0.0
            for n in range(m + 1):
                ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                s = _gather(sig, ia, ib, fa, fb)
                if n > 0:
                    D += 0.5 * step * (sp + s)
                wtab[base + n] = _qweight(n, m, r, step) * np.exp(-D)
                sp = s
            ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
            s = _gather(sig, ia, ib, fa, fb)
            D += 0.5 * r * (sp + s)
            e = np.exp(-D)
            wtab[base + m + 1] = 0.5 * r * e
            atten[k, a] = e


@njit(parallel=True, cache=True)
def boundary_attenuation(sig, x0, y0, h, nx, ny, dirs, active, tau, step, atten):
    """``exp(-int_0^tau sigma)`` along every backward ray (trapezoid)."""
    M = dirs.shape[0]
    na = active.shape[0]
    for k in prange(M):
        vx = dirs[k, 0]
        vy = dirs[k, 1]
        ca = vx * step / h
        cb = vy * step / h
        for a in range(na):
            node = active[a]
            ai = float(node // ny)
            bi = float(node % ny)
            t = tau[k, a]
            m, r = _split(t, step)
            D = 0.0
            sp = 0.0
            for n in range(m + 1):
                ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                s = _gather(sig, ia, ib, fa, fb)
                if n > 0:
                    D += 0.5 * step * (sp + s)
                sp = s
            ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
            s = _gather(sig, ia, ib, fa, fb)
            D += 0.5 * r * (sp + s)
            atten[k, a] = np.exp(-D)


@njit(parallel=True, cache=True)
def sweep(src, sig, use_table, ptr, wtab, x0, y0, h, nx, ny, dirs, active, tau, step, out):
    """``out[k, a] = int_0^tau exp(-int_0^s sigma) src_k(x_a - s v_k) ds``."""
    M = dirs.shape[0]
    na = active.shape[0]
    for k in prange(M):
        vx = dirs[k, 0]
        vy = dirs[k, 1]
        ca = vx * step / h
        cb = vy * step / h
        f = src[k]
        for a in range(na):
            node = active[a]
            ai = float(node // ny)
            bi = float(node % ny)
            t = tau[k, a]
            m, r = _split(t, step)
            acc = 0.0
            if use_table:
                base = ptr[k * na + a]
                for n in range(m + 1):
                    ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                    acc += wtab[base + n] * _gather(f, ia, ib, fa, fb)
                ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
                acc += wtab[base + m + 1] * _gather(f, ia, ib, fa, fb)
            else:
                D = 0.0
                sp = 0.0
                for n in range(m + 1):
                    ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                    s = _gather(sig, ia, ib, fa, fb)
                    if n > 0:
                        D += 0.5 * step * (sp + s)
                    acc += _qweight(n, m, r, step) * np.exp(-D) * _gather(f, ia, ib, fa, fb)
                    sp = s
                ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
                s = _gather(sig, ia, ib, fa, fb)
                D += 0.5 * r * (sp + s)
                acc += 0.5 * r * np.exp(-D) * _gather(f, ia, ib, fa, fb)
            out[k, node // ny, node % ny] = acc


@njit(parallel=True, cache=True)
def sweep_transpose(lam, sig, use_table, ptr, wtab, x0, y0, h, nx, ny, dirs, active, tau, step, out):
    """Exact transpose of :func:`sweep`: scatter ``lam`` back along every ray."""
    M = dirs.shape[0]
    na = active.shape[0]
    for k in prange(M):
        vx = dirs[k, 0]
        vy = dirs[k, 1]
        ca = vx * step / h
        cb = vy * step / h
        o = out[k]
        for a in range(na):
            node = active[a]
            lv = lam[k, node // ny, node % ny]
            if lv == 0.0:
                continue
            ai = float(node // ny)
            bi = float(node % ny)
            t = tau[k, a]
            m, r = _split(t, step)
            if use_table:
                base = ptr[k * na + a]
                for n in range(m + 1):
                    ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                    _spread(o, ia, ib, fa, fb, lv * wtab[base + n])
                ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
                _spread(o, ia, ib, fa, fb, lv * wtab[base + m + 1])
            else:
                D = 0.0
                sp = 0.0
                for n in range(m + 1):
                    ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                    s = _gather(sig, ia, ib, fa, fb)
                    if n > 0:
                        D += 0.5 * step * (sp + s)
                    _spread(o, ia, ib, fa, fb, lv * _qweight(n, m, r, step) * np.exp(-D))
                    sp = s
                ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
                s = _gather(sig, ia, ib, fa, fb)
                D += 0.5 * r * (sp + s)
                _spread(o, ia, ib, fa, fb, lv * 0.5 * r * np.exp(-D))


@njit(parallel=True, cache=True)
def tangent(src, gb, sig, dsig, x0, y0, h, nx, ny, dirs, active, tau, step, out):
    """Directional derivative of ``B g + T src`` with respect to ``sigma`` along ``dsig``.

    ``gb[k, a]`` is the boundary value at the end of ray ``(k, a)``.
    """
    M = dirs.shape[0]
    na = active.shape[0]
    for k in prange(M):
        vx = dirs[k, 0]
        vy = dirs[k, 1]
        ca = vx * step / h
        cb = vy * step / h
        f = src[k]
        for a in range(na):
            node = active[a]
            ai = float(node // ny)
            bi = float(node % ny)
            t = tau[k, a]
            m, r = _split(t, step)
            D = 0.0
            dD = 0.0
            sp = 0.0
            dsp = 0.0
            acc = 0.0
            for n in range(m + 1):
                ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                s = _gather(sig, ia, ib, fa, fb)
                ds = _gather(dsig, ia, ib, fa, fb)
                if n > 0:
                    D += 0.5 * step * (sp + s)
                    dD += 0.5 * step * (dsp + ds)
                acc -= _qweight(n, m, r, step) * np.exp(-D) * _gather(f, ia, ib, fa, fb) * dD
                sp = s
                dsp = ds
            ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
            s = _gather(sig, ia, ib, fa, fb)
            ds = _gather(dsig, ia, ib, fa, fb)
            D += 0.5 * r * (sp + s)
            dD += 0.5 * r * (dsp + ds)
            acc -= (0.5 * r * _gather(f, ia, ib, fa, fb) + gb[k, a]) * np.exp(-D) * dD
            out[k, node // ny, node % ny] = acc


@njit(parallel=True, cache=True)
def sigma_adjoint(lam, src, gb, sig, x0, y0, h, nx, ny, dirs, active, tau, step, maxlen, out):
    """Gradient of ``<lam, B g + T src>`` with respect to nodal ``sigma``.

    Writes one lattice slice per direction into ``out[k]``; the caller sums
    over ``k``. Each ray is walked forward to accumulate the attenuated terms
    and then backward with suffix sums, which gives the derivative of every
    cumulative trapezoid exponent in linear time.
    """
    M = dirs.shape[0]
    na = active.shape[0]
    for k in prange(M):
        vx = dirs[k, 0]
        vy = dirs[k, 1]
        ca = vx * step / h
        cb = vy * step / h
        f = src[k]
        o = out[k]
        terms = np.empty(maxlen)
        for a in range(na):
            node = active[a]
            lv = lam[k, node // ny, node % ny]
            if lv == 0.0:
                continue
            ai = float(node // ny)
            bi = float(node % ny)
            t = tau[k, a]
            m, r = _split(t, step)
            D = 0.0
            sp = 0.0
            for n in range(m + 1):
                ia, ib, fa, fb = _cell(ai - n * ca, bi - n * cb, nx, ny)
                s = _gather(sig, ia, ib, fa, fb)
                if n > 0:
                    D += 0.5 * step * (sp + s)
                terms[n] = lv * _qweight(n, m, r, step) * np.exp(-D) * _gather(f, ia, ib, fa, fb)
                sp = s
            ia, ib, fa, fb = _cell(ai - t * vx / h, bi - t * vy / h, nx, ny)
            s = _gather(sig, ia, ib, fa, fb)
            D += 0.5 * r * (sp + s)
            te = lv * (0.5 * r * _gather(f, ia, ib, fa, fb) + gb[k, a]) * np.exp(-D)
            # boundary sample enters only the last trapezoid panel
            _spread(o, ia, ib, fa, fb, -0.5 * r * te)
            R = 0.0
            for j in range(m, -1, -1):
                if j >= 1:
                    c = 0.5 * step * terms[j] + step * R
                else:
                    c = 0.5 * step * R
                if j == m:
                    if m >= 1:
                        c += (0.5 * r + 0.5 * step) * te
                    else:
                        c += 0.5 * r * te
                elif j >= 1:
                    c += step * te
                else:
                    c += 0.5 * step * te
                ia, ib, fa, fb = _cell(ai - j * ca, bi - j * cb, nx, ny)
                _spread(o, ia, ib, fa, fb, -c)
                R += terms[j]


@njit(parallel=True, cache=True)
def optical_depths(sig, x0, y0, h, nx, ny, px, py, vx, vy, length, step):
    """Trapezoid line integrals of ``sigma`` from ``p`` along ``-v`` over ``length``."""
    n = px.shape[0]
    out = np.empty(n)
    for i in prange(n):
        L = length[i]
        if L <= 0.0:
            out[i] = 0.0
            continue
        m = int(np.ceil(L / step))
        if m < 1:
            m = 1
        ds = L / m
        acc = 0.0
        for j in range(m + 1):
            ia, ib, fa, fb = _cell((px[i] - j * ds * vx[i] - x0) / h, (py[i] - j * ds * vy[i] - y0) / h, nx, ny)
            s = _gather(sig, ia, ib, fa, fb)
            if j == 0 or j == m:
                acc += 0.5 * s
            else:
                acc += s
        out[i] = acc * ds
    return out
