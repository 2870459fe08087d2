"""Numba twins of the hot kernels (see _numpy.py for the reference
semantics).  Loops are written explicitly; @njit compiles them lazily on
first call."""

import numpy as np
from numba import njit

from ._numpy import JACOBI_TOL, JACOBI_MAX_SWEEPS


@njit(cache=True)
def _jacobi_inplace(a):
    n = a.shape[0]
    scale = 0.0
    for i in range(n):
        for j in range(n):
            scale += a[i, j] * a[i, j]
    scale = np.sqrt(scale)
    if scale == 0.0:
        return
    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        if np.sqrt(off) <= JACOBI_TOL * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + np.sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk


@njit(cache=True)
def _jacobi_eigvals(a):
    n = a.shape[0]
    work = a.copy()
    _jacobi_inplace(work)
    out = np.empty(n)
    for i in range(n):
        out[i] = work[i, i]
    return np.sort(out)


def jacobi_eigvals(a):
    return _jacobi_eigvals(np.ascontiguousarray(a, dtype=np.float64))


@njit(cache=True)
def _jacobi_extremal_batch(mats):
    nb = mats.shape[0]
    n = mats.shape[1]
    extremal = np.empty(nb)
    trace = np.empty(nb)
    work = np.empty((n, n))
    for k in range(nb):
        tr = 0.0
        for i in range(n):
            for j in range(n):
                work[i, j] = mats[k, i, j]
            tr += mats[k, i, i]
        trace[k] = tr
        _jacobi_inplace(work)
        best = 0.0
        for i in range(n):
            if abs(work[i, i]) > best:
                best = abs(work[i, i])
        extremal[k] = best
    return extremal, trace


def jacobi_extremal_batch(mats):
    return _jacobi_extremal_batch(np.ascontiguousarray(mats, dtype=np.float64))


@njit(cache=True)
def _axisym_system(v, wi, ei, si, ni, bw, be, bs, bn, hw, he, hs, hn,
                   rho, axis, n_dim, s_curv, source, want_jac):
    m = v.shape[0]
    f = np.empty(m)
    dc = np.empty(m)
    dw = np.empty(m)
    de = np.empty(m)
    ds = np.empty(m)
    dn = np.empty(m)
    for i in range(m):
        vc = v[i]
        vw = v[wi[i]] if wi[i] >= 0 else bw[i]
        ve = v[ei[i]] if ei[i] >= 0 else be[i]
        vs = v[si[i]] if si[i] >= 0 else bs[i]
        vn = v[ni[i]] if ni[i] >= 0 else bn[i]

        hwi = hw[i]
        hei = he[i]
        hsi = hs[i]
        hni = hn[i]

        cw2 = 2.0 / (hwi * (hwi + hei))
        ce2 = 2.0 / (hei * (hwi + hei))
        cc2z = -2.0 / (hwi * hei)
        cw1 = -hei / (hwi * (hwi + hei))
        ce1 = hwi / (hei * (hwi + hei))
        cc1z = (hei - hwi) / (hwi * hei)

        vzz = cw2 * vw + cc2z * vc + ce2 * ve
        vz = cw1 * vw + cc1z * vc + ce1 * ve

        if axis[i]:
            vrr_ax = 2.0 * (vn - vc) / (hni * hni)
            lap = vzz + (n_dim - 1.0) * vrr_ax
            grad2 = vz * vz
            f[i] = (vc * lap + s_curv * vc * vc / (2.0 * (n_dim - 1.0))
                    - 0.5 * n_dim * (grad2 - 1.0) - source[i])
            if want_jac:
                dlap_dc = cc2z + (n_dim - 1.0) * (-2.0 / (hni * hni))
                dc[i] = (vc * dlap_dc + lap + s_curv * vc / (n_dim - 1.0)
                         - 0.5 * n_dim * 2.0 * vz * cc1z)
                dw[i] = vc * cw2 - n_dim * vz * cw1
                de[i] = vc * ce2 - n_dim * vz * ce1
                ds[i] = 0.0
                dn[i] = vc * (n_dim - 1.0) * (2.0 / (hni * hni))
        else:
            cs2 = 2.0 / (hsi * (hsi + hni))
            cn2 = 2.0 / (hni * (hsi + hni))
            cc2r = -2.0 / (hsi * hni)
            cs1 = -hni / (hsi * (hsi + hni))
            cn1 = hsi / (hni * (hsi + hni))
            cc1r = (hni - hsi) / (hsi * hni)

            vrr = cs2 * vs + cc2r * vc + cn2 * vn
            vr = cs1 * vs + cc1r * vc + cn1 * vn
            inv_rho = 1.0 / rho[i]

            lap = vzz + vrr + (n_dim - 2.0) * inv_rho * vr
            grad2 = vz * vz + vr * vr
            f[i] = (vc * lap + s_curv * vc * vc / (2.0 * (n_dim - 1.0))
                    - 0.5 * n_dim * (grad2 - 1.0) - source[i])
            if want_jac:
                dlap_dc = cc2z + cc2r + (n_dim - 2.0) * inv_rho * cc1r
                dc[i] = (vc * dlap_dc + lap + s_curv * vc / (n_dim - 1.0)
                         - 0.5 * n_dim * 2.0 * (vz * cc1z + vr * cc1r))
                dw[i] = vc * cw2 - n_dim * vz * cw1
                de[i] = vc * ce2 - n_dim * vz * ce1
                ds[i] = (vc * (cs2 + (n_dim - 2.0) * inv_rho * cs1)
                         - n_dim * vr * cs1)
                dn[i] = (vc * (cn2 + (n_dim - 2.0) * inv_rho * cn1)
                         - n_dim * vr * cn1)
    return f, dc, dw, de, ds, dn


def axisym_system(v, wi, ei, si, ni, bw, be, bs, bn, hw, he, hs, hn,
                  rho, axis, n_dim, s_curv, source, want_jac):
    f, dc, dw, de, ds, dn = _axisym_system(
        v, wi, ei, si, ni, bw, be, bs, bn, hw, he, hs, hn,
        rho, axis, float(n_dim), float(s_curv), source, want_jac)
    if not want_jac:
        return f, None, None, None, None, None
    return f, dc, dw, de, ds, dn
