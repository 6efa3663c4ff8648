"""Compiled inner loops for boundary quadrature over S^3.

Every target is summed serially over sources in node order, so results do
not depend on the number of threads.
"""
import math

import numba
import numpy as np
from numba import njit, prange

# try OpenMP before TBB; an outdated TBB only produces a warning
numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

_C = 1.0 / (2.0 * math.pi ** 2)


@njit(parallel=True, cache=True)
def kn_apply(X, NP, W, F, Q, omit, G):
    """out[m] = sum_{k != omit[m]} W[k] K(X[k]-Q[m]) NP[k] (F[k]-G[m]).

    NP holds psi-normals (n0, n1, -n2, n3); omit[m] < 0 disables omission.
    """
    M = Q.shape[0]
    N = X.shape[0]
    out = np.zeros((M, 4))
    for m in prange(M):
        q0, q1, q2, q3 = Q[m, 0], Q[m, 1], Q[m, 2], Q[m, 3]
        g0, g1, g2, g3 = G[m, 0], G[m, 1], G[m, 2], G[m, 3]
        s0 = 0.0
        s1 = 0.0
        s2 = 0.0
        s3 = 0.0
        om = omit[m]
        for k in range(N):
            if k == om:
                continue
            d0 = X[k, 0] - q0
            d1 = X[k, 1] - q1
            d2 = X[k, 2] - q2
            d3 = X[k, 3] - q3
            r2 = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3
            c = W[k] * _C / (r2 * r2)
            # kernel = (d0, -d1, d2, -d3) * c
            a0 = d0 * c
            a1 = -d1 * c
            a2 = d2 * c
            a3 = -d3 * c
            b0, b1, b2, b3 = NP[k, 0], NP[k, 1], NP[k, 2], NP[k, 3]
            # p = kernel * normal
            p0 = a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3
            p1 = a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2
            p2 = a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1
            p3 = a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0
            f0 = F[k, 0] - g0
            f1 = F[k, 1] - g1
            f2 = F[k, 2] - g2
            f3 = F[k, 3] - g3
            s0 += p0 * f0 - p1 * f1 - p2 * f2 - p3 * f3
            s1 += p0 * f1 + p1 * f0 + p2 * f3 - p3 * f2
            s2 += p0 * f2 - p1 * f3 + p2 * f0 + p3 * f1
            s3 += p0 * f3 + p1 * f2 - p2 * f1 + p3 * f0
        out[m, 0] = s0
        out[m, 1] = s1
        out[m, 2] = s2
        out[m, 3] = s3
    return out


@njit(parallel=True, cache=True)
def k12_apply(Z1, Z2, NRM, W, U, T1, T2, omit):
    """Complex-form sums at targets (T1, T2):

    A[m] = sum W K1(xi - t) U(xi),  B[m] = sum W K2(xi - t) conj(U(xi)),
    with K1, K2 written out from their complex-coordinate formulas.
    """
    M = T1.shape[0]
    N = Z1.shape[0]
    A = np.zeros(M, dtype=np.complex128)
    B = np.zeros(M, dtype=np.complex128)
    for m in prange(M):
        sa = 0j
        sb = 0j
        om = omit[m]
        for k in range(N):
            if k == om:
                continue
            e1 = Z1[k] - T1[m]
            e2 = Z2[k] - T2[m]
            r2 = e1.real * e1.real + e1.imag * e1.imag + e2.real * e2.real + e2.imag * e2.imag
            c = W[k] * _C / (r2 * r2)
            m1 = complex(NRM[k, 0], NRM[k, 1])
            m2 = complex(NRM[k, 2], NRM[k, 3])
            k1 = (e1.conjugate() * m1 + e2.conjugate() * m2) * c
            k2 = (e2.conjugate() * m1.conjugate() - e1.conjugate() * m2.conjugate()) * c
            sa += k1 * U[k]
            sb += k2 * U[k].conjugate()
        A[m] = sa
        B[m] = sb
    return A, B


@njit(inline="always")
def _kn_moment(x0, x1, x2, x3, t0, t1, t2, t3, w, acc):
    # acc[j, :] += w * K(x - t) n_psi(x) * (x - t)_j for j < 4, acc[4, :] += w * K n_psi;
    # normal = x on S^3
    d0 = x0 - t0
    d1 = x1 - t1
    d2 = x2 - t2
    d3 = x3 - t3
    r2 = d0 * d0 + d1 * d1 + d2 * d2 + d3 * d3
    c = w * _C / (r2 * r2)
    a0 = d0 * c
    a1 = -d1 * c
    a2 = d2 * c
    a3 = -d3 * c
    b0, b1, b2, b3 = x0, x1, -x2, x3
    p0 = a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3
    p1 = a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2
    p2 = a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1
    p3 = a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0
    for j, dj in enumerate((d0, d1, d2, d3)):
        acc[j, 0] += p0 * dj
        acc[j, 1] += p1 * dj
        acc[j, 2] += p2 * dj
        acc[j, 3] += p3 * dj
    acc[4, 0] += p0
    acc[4, 1] += p1
    acc[4, 2] += p2
    acc[4, 3] += p3


@njit(inline="always")
def _cell_fine(P0, T0, F0, dps, dth, dph, s, t0, t1, t2, t3, scale, acc):
    # midpoint rule on s^3 sub-cells of one (psi, theta, phi) cell
    for u in range(s):
        P = P0 + ((u + 0.5) / s - 0.5) * dps
        sp = math.sin(P)
        cp = math.cos(P)
        for v in range(s):
            Th = T0 + ((v + 0.5) / s - 0.5) * dth
            st = math.sin(Th)
            ct = math.cos(Th)
            wpt = scale * sp * sp * st * dps * dth * dph / (s * s * s)
            for q in range(s):
                F = F0 + ((q + 0.5) / s - 0.5) * dph
                _kn_moment(cp, sp * ct, sp * st * math.cos(F), sp * st * math.sin(F),
                           t0, t1, t2, t3, wpt, acc)


@njit(parallel=True, cache=True)
def near_moments(angles, gidx, slot, nodes, weights, steps, s, targets):
    """Zeroth and first moments of the kernel over the 3x3x3 index
    neighbourhood of each target: fine sub-cell quadrature minus the coarse
    node rule.

    Returns M (T, 5, 4) with M[m, j] = sum_cells (fine - coarse) of
    w K(x - t) n_psi(x) (x - t)_j for j < 4 and M[m, 4] the same without the
    (x - t)_j factor.  The target's own cell has no coarse term; its fine
    value is Richardson-extrapolated from s and 2s sub-cells, which removes
    the leading error of the weakly singular integrand.
    """
    dps, dth, dph = steps[0], steps[1], steps[2]
    n_psi, n_theta, n_phi = slot.shape
    T = targets.shape[0]
    M = np.zeros((T, 5, 4))
    for m in prange(T):
        tid = targets[m]
        t0, t1, t2, t3 = nodes[tid, 0], nodes[tid, 1], nodes[tid, 2], nodes[tid, 3]
        ip, it, iph = gidx[tid, 0], gidx[tid, 1], gidx[tid, 2]
        acc = np.zeros((5, 4))
        for a in range(-1, 2):
            i = ip + a
            if i < 0 or i >= n_psi:
                continue
            for b in range(-1, 2):
                j = it + b
                if j < 0 or j >= n_theta:
                    continue
                for c in range(-1, 2):
                    k = (iph + c) % n_phi
                    cid = slot[i, j, k]
                    P0, T0, F0 = angles[cid, 0], angles[cid, 1], angles[cid, 2]
                    if cid == tid:
                        _cell_fine(P0, T0, F0, dps, dth, dph, 2 * s, t0, t1, t2, t3, 2.0, acc)
                        _cell_fine(P0, T0, F0, dps, dth, dph, s, t0, t1, t2, t3, -1.0, acc)
                    else:
                        _cell_fine(P0, T0, F0, dps, dth, dph, s, t0, t1, t2, t3, 1.0, acc)
                        _kn_moment(nodes[cid, 0], nodes[cid, 1], nodes[cid, 2], nodes[cid, 3],
                                   t0, t1, t2, t3, -weights[cid], acc)
        M[m] = acc
    return M


@njit(parallel=True, cache=True)
def stencil_apply(nbr, B, F, targets):
    """sum_n B[m, n] (F[nbr[m, n]] - F[t]) with quaternion weights B."""
    T = targets.shape[0]
    out = np.zeros((T, 4))
    for m in prange(T):
        tid = targets[m]
        for n in range(nbr.shape[1]):
            k = nbr[m, n]
            if k < 0:
                continue
            a0, a1, a2, a3 = B[m, n, 0], B[m, n, 1], B[m, n, 2], B[m, n, 3]
            f0 = F[k, 0] - F[tid, 0]
            f1 = F[k, 1] - F[tid, 1]
            f2 = F[k, 2] - F[tid, 2]
            f3 = F[k, 3] - F[tid, 3]
            out[m, 0] += a0 * f0 - a1 * f1 - a2 * f2 - a3 * f3
            out[m, 1] += a0 * f1 + a1 * f0 + a2 * f3 - a3 * f2
            out[m, 2] += a0 * f2 - a1 * f3 + a2 * f0 + a3 * f1
            out[m, 3] += a0 * f3 + a1 * f2 - a2 * f1 + a3 * f0
    return out


def set_workers(n):
    if n is not None and n > 0:
        numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))
