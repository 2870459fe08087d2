"""Pure-numpy reference implementations of the hot kernels.

These are the fallback path (YAMABE_LAB_KERNELS=numpy) and the semantic
reference the numba twins are tested against.  Keep the arithmetic order
identical between the two backends: the determinism contract is per-backend,
but tests compare them at 1e-14.
"""

import numpy as np

#: off-diagonal norm target for the cyclic Jacobi sweep, relative to the
#: Frobenius norm of the input matrix
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 60


def jacobi_eigvals(a):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi iteration.

    Sweeps run over (p, q) pairs in fixed row-major order, so ties break
    deterministically.  Returns eigenvalues sorted ascending.
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    scale = np.sqrt(np.sum(a * a))
    if scale == 0.0:
        return np.zeros(n)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] ** 2
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
                rot = np.eye(n)
                rot[p, p] = c
                rot[q, q] = c
                rot[p, q] = s
                rot[q, p] = -s
                a = rot.T @ a @ rot
                a = 0.5 * (a + a.T)
    return np.sort(np.diag(a))


def jacobi_extremal_batch(mats):
    """max|eigenvalue| and trace for a batch of symmetric matrices.

    mats: (N, n, n).  Vectorized cyclic Jacobi: every sweep applies the
    (p, q) rotations to the whole batch; matrices already converged get an
    identity rotation through the tiny-pivot guard.
    """
    a = np.array(mats, dtype=np.float64)
    nb, n, _ = a.shape
    trace = np.einsum("kii->k", a)
    scale = np.sqrt(np.sum(a * a, axis=(1, 2)))
    scale[scale == 0.0] = 1.0
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.sqrt(2.0 * sum(a[:, p, q] ** 2
                                for p in range(n - 1)
                                for q in range(p + 1, n)))
        if np.all(off <= JACOBI_TOL * scale):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[:, p, q]
                live = np.abs(apq) > 1e-300
                theta = np.zeros(nb)
                theta[live] = (a[live, q, q] - a[live, p, p]) / (2.0 * apq[live])
                with np.errstate(divide="ignore"):
                    t = np.where(
                        theta >= 0.0,
                        1.0 / (theta + np.sqrt(theta * theta + 1.0)),
                        -1.0 / (-theta + np.sqrt(theta * theta + 1.0)),
                    )
                t = np.where(live, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rows_p = c[:, None] * a[:, p, :] - s[:, None] * a[:, q, :]
                rows_q = s[:, None] * a[:, p, :] + c[:, None] * a[:, q, :]
                a[:, p, :] = rows_p
                a[:, q, :] = rows_q
                cols_p = c[:, None] * a[:, :, p] - s[:, None] * a[:, :, q]
                cols_q = s[:, None] * a[:, :, p] + c[:, None] * a[:, :, q]
                a[:, :, p] = cols_p
                a[:, :, q] = cols_q
    eigs = np.einsum("kii->ki", a)
    return np.max(np.abs(eigs), axis=1), trace


def axisym_system(v, wi, ei, si, ni, bw, be, bs, bn, hw, he, hs, hn,
                  rho, axis, n_dim, s_curv, source, want_jac):
    """Residual (and optionally 5-diagonal Jacobian) of the v-form operator
    on an axisymmetric cut-cell layout.

    Operator per unknown c:
        F = v_c * (v_zz + v_rr + (n-2)/rho * v_r)
            + s_curv * v_c^2 / (2(n-1)) - (n/2) * (v_z^2 + v_r^2 - 1) - source
    Axis nodes (rho = 0) use the symmetric limit v_zz + (n-1) * v_rr.
    Neighbor indices < 0 mean the arm hits a Dirichlet value (b*).
    """
    vc = v
    vw = np.where(wi >= 0, v[np.maximum(wi, 0)], bw)
    ve = np.where(ei >= 0, v[np.maximum(ei, 0)], be)
    vs = np.where(si >= 0, v[np.maximum(si, 0)], bs)
    vn = np.where(ni >= 0, v[np.maximum(ni, 0)], bn)

    cw2 = 2.0 / (hw * (hw + he))
    ce2 = 2.0 / (he * (hw + he))
    cc2z = -2.0 / (hw * he)
    cw1 = -he / (hw * (hw + he))
    ce1 = hw / (he * (hw + he))
    cc1z = (he - hw) / (hw * he)

    cs2 = 2.0 / (hs * (hs + hn))
    cn2 = 2.0 / (hn * (hs + hn))
    cc2r = -2.0 / (hs * hn)
    cs1 = -hn / (hs * (hs + hn))
    cn1 = hs / (hn * (hs + hn))
    cc1r = (hn - hs) / (hs * hn)

    vzz = cw2 * vw + cc2z * vc + ce2 * ve
    vz = cw1 * vw + cc1z * vc + ce1 * ve
    vrr = cs2 * vs + cc2r * vc + cn2 * vn
    vr = cs1 * vs + cc1r * vc + cn1 * vn

    # axis limit: mirror symmetry kills v_r and turns the first-order term
    # into (n-2) extra copies of v_rr
    ax = axis
    vrr_ax = 2.0 * (vn - vc) / (hn * hn)
    inv_rho = np.where(ax, 0.0, 1.0 / np.where(ax, 1.0, rho))

    lap = np.where(ax,
                   vzz + (n_dim - 1.0) * vrr_ax,
                   vzz + vrr + (n_dim - 2.0) * inv_rho * vr)
    vr_eff = np.where(ax, 0.0, vr)
    grad2 = vz * vz + vr_eff * vr_eff

    f = (vc * lap + s_curv * vc * vc / (2.0 * (n_dim - 1.0))
         - 0.5 * n_dim * (grad2 - 1.0) - source)
    if not want_jac:
        return f, None, None, None, None, None

    dlap_dc = np.where(ax,
                       cc2z + (n_dim - 1.0) * (-2.0 / (hn * hn)),
                       cc2z + cc2r + (n_dim - 2.0) * inv_rho * cc1r)
    dgrad_dc = 2.0 * (vz * cc1z + vr_eff * np.where(ax, 0.0, cc1r))
    dc = (vc * dlap_dc + lap + s_curv * vc / (n_dim - 1.0)
          - 0.5 * n_dim * dgrad_dc)

    dw = vc * cw2 - n_dim * vz * cw1
    de = vc * ce2 - n_dim * vz * ce1
    ds = np.where(ax, 0.0,
                  vc * (cs2 + (n_dim - 2.0) * inv_rho * cs1)
                  - n_dim * vr_eff * cs1)
    dn = np.where(ax,
                  vc * (n_dim - 1.0) * (2.0 / (hn * hn)),
                  vc * (cn2 + (n_dim - 2.0) * inv_rho * cn1)
                  - n_dim * vr_eff * cn1)
    return f, dc, dw, de, ds, dn
