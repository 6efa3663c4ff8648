"""psi-hyperholomorphic Cauchy kernel and the boundary integral operators
built from it on S^3.

Conventions used throughout:

* quaternions are (..., 4) float arrays in the basis (1, i, j, k);
* the structural set is psi = (1, i, -j, k), so a real 4-vector n maps to
  n_psi = n0 + n1 i - n2 j + n3 k;
* every integrand is multiplied left to right as kernel * normal * density;
* principal values drop the quadrature cell of the singular node.  The
  ``"corrected"`` rule additionally replaces the midpoint rule on the 3x3x3
  block of cells around the target by a sub-cell rule applied to a local
  least-squares linear model of the density (see ``_local_correction``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _quad
from .hquat import Quaternion, from_pair_arrays, qmul, qconj
from .surface import BoundaryField, SurfaceMesh

TWO_PI2 = 2.0 * math.pi ** 2
PSI_SIGNS = np.array([1.0, 1.0, -1.0, 1.0])
STRUCTURAL_SET = (Quaternion(1), Quaternion(0, 1), Quaternion(0, 0, -1), Quaternion(0, 0, 0, 1))

RULES = ("corrected", "omit")
FORMS = ("subtracted", "alpha")


class SingularityError(ValueError):
    pass


class AccuracyError(ValueError):
    pass


def psi_vector(n):
    """n_psi = n0 + n1 i - n2 j + n3 k for real 4-vectors n (..., 4)."""
    return np.asarray(n, dtype=float) * PSI_SIGNS


def kernel_array(d):
    """Cauchy kernel on (..., 4) arrays: (x0 - x1 i + x2 j - x3 k) / (2 pi^2 |x|^4)."""
    d = np.asarray(d, dtype=float)
    r2 = np.sum(d * d, axis=-1)
    if np.any(r2 == 0):
        raise SingularityError("Cauchy kernel evaluated at 0")
    return d * np.array([1.0, -1.0, 1.0, -1.0]) / (TWO_PI2 * r2[..., None] ** 2)


def cauchy_kernel(q) -> Quaternion:
    """(1/2pi^2) (conj z1 + conj z2 j) / (|z1|^2 + |z2|^2)^2 for q = z1 + z2 j."""
    arr = q.to_array() if isinstance(q, Quaternion) else np.asarray(q, dtype=float)
    return Quaternion.from_array(kernel_array(arr))


def kernel_normal(xi, z, n):
    """K(xi - z) n_psi(n), broadcasting over leading axes."""
    return qmul(kernel_array(np.asarray(xi) - np.asarray(z)), psi_vector(n))


# ---------------------------------------------------------------------------
# psi-Cauchy-Riemann operator on regular 4-D grids


@dataclass
class GridField4D:
    """Quaternion values on a regular grid: values[i0, i1, i2, i3, :]."""

    values: np.ndarray
    spacing: float
    origin: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.origin = np.asarray(self.origin, dtype=float)
        if self.values.ndim != 5 or self.values.shape[-1] != 4:
            raise ValueError("grid field values must have shape (n0, n1, n2, n3, 4)")

    @classmethod
    def from_function(cls, fn, center, spacing, n):
        center = np.asarray(center, dtype=float)
        origin = center - spacing * (n - 1) / 2
        axes = [origin[a] + spacing * np.arange(n) for a in range(4)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return cls(np.asarray(fn(pts), dtype=float), spacing, origin)

    @property
    def shape(self):
        return self.values.shape[:4]

    def points(self):
        axes = [self.origin[a] + self.spacing * np.arange(n) for a, n in enumerate(self.shape)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)


def _central_diff(f: GridField4D, axis: int):
    v = f.values
    hi = [slice(1, -1)] * 4
    lo = [slice(1, -1)] * 4
    hi[axis] = slice(2, None)
    lo[axis] = slice(None, -2)
    return (v[tuple(hi)] - v[tuple(lo)]) / (2 * f.spacing)


def _check_grid(f: GridField4D):
    if min(f.shape) < 5:
        raise ValueError(f"grid needs >= 5 points per axis, got {f.shape}")


def psi_d_residual(f: GridField4D):
    """Central-difference psi-D f on interior nodes.

    Returns ``(real_form, complex_form)``: the first applies
    d0 + i d1 - j d2 + k d3 from the left, the second evaluates
    2 (d/dzbar1 - j d/dzbar2) on the complex pair (u, v) with f = u + v j.
    """
    _check_grid(f)
    d = [_central_diff(f, a) for a in range(4)]
    unit = [np.array(q.to_array()) for q in STRUCTURAL_SET]
    real = d[0] + qmul(unit[1], d[1]) + qmul(unit[2], d[2]) + qmul(unit[3], d[3])

    du = [x[..., 0] + 1j * x[..., 1] for x in d]
    dv = [x[..., 2] + 1j * x[..., 3] for x in d]
    dzb1_u = 0.5 * (du[0] + 1j * du[1])
    dzb1_v = 0.5 * (dv[0] + 1j * dv[1])
    dzb2_u = 0.5 * (du[2] + 1j * du[3])
    dzb2_v = 0.5 * (dv[2] + 1j * dv[3])
    cplx = from_pair_arrays(2 * (dzb1_u + np.conj(dzb2_v)), 2 * (dzb1_v - np.conj(dzb2_u)))

    origin = f.origin + f.spacing
    return GridField4D(real, f.spacing, origin), GridField4D(cplx, f.spacing, origin)


def cimmino_residual(f: GridField4D) -> tuple[float, float]:
    """Max-norms of  dzbar1 u + dz2 conj(v)  and  dzbar2 u - dz1 conj(v)."""
    _check_grid(f)
    d = [_central_diff(f, a) for a in range(4)]
    du = [x[..., 0] + 1j * x[..., 1] for x in d]
    dvb = [x[..., 2] - 1j * x[..., 3] for x in d]  # derivatives of conj(v)
    eq1 = 0.5 * (du[0] + 1j * du[1]) + 0.5 * (dvb[2] - 1j * dvb[3])
    eq2 = 0.5 * (du[2] + 1j * du[3]) - 0.5 * (dvb[0] - 1j * dvb[1])
    return float(np.abs(eq1).max()), float(np.abs(eq2).max())


def fundamental_solution_order(q0, center=(0.0, 0.0, 0.0, 0.0), spacing=0.05, n=17):
    """Observed order of psi_d_residual on K(. - q0) under h-halving.

    The coarse grid has n^4 nodes; the fine grid covers the same box at
    spacing/2 and is compared on the coarse interior nodes.
    """
    fn = lambda x: kernel_array(x - np.asarray(q0, dtype=float))
    coarse = GridField4D.from_function(fn, center, spacing, n)
    fine = GridField4D.from_function(fn, center, spacing / 2, 2 * n - 1)
    rc, cc = psi_d_residual(coarse)
    rf, _ = psi_d_residual(fine)
    # interior coarse nodes sit at odd fine-interior indices
    rf_on_coarse = rf.values[1::2, 1::2, 1::2, 1::2]
    e_coarse = float(np.linalg.norm(rc.values, axis=-1).max())
    e_fine = float(np.linalg.norm(rf_on_coarse, axis=-1).max())
    c1, c2 = cimmino_residual(coarse)
    return {
        "residual_h": e_coarse,
        "residual_h2": e_fine,
        "order": math.log2(e_coarse / e_fine),
        "forms_agree": float(np.abs(rc.values - cc.values).max()),
        "cimmino": (c1, c2),
    }


# ---------------------------------------------------------------------------
# boundary quadrature


def _geom(mesh: SurfaceMesh):
    c = mesh.cache
    if "psi_normals" not in c:
        c["psi_normals"] = np.ascontiguousarray(psi_vector(mesh.normals))
        c["z1"] = mesh.nodes[:, 0] + 1j * mesh.nodes[:, 1]
        c["z2"] = mesh.nodes[:, 2] + 1j * mesh.nodes[:, 3]
    return c


def _targets(mesh, targets):
    if targets is None:
        return np.arange(len(mesh), dtype=np.int64)
    return np.atleast_1d(np.asarray(targets, dtype=np.int64))


def _kn_sum(mesh, F, points, omit=None, subtract=None):
    F = np.ascontiguousarray(F, dtype=float)
    points = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
    m = len(points)
    omit = np.full(m, -1, dtype=np.int64) if omit is None else np.asarray(omit, dtype=np.int64)
    G = np.zeros((m, 4)) if subtract is None else np.ascontiguousarray(subtract, dtype=float)
    g = _geom(mesh)
    return _quad.kn_apply(mesh.nodes, g["psi_normals"], mesh.weights, F, points, omit, G)


def _tangent_frame(angles):
    P, T, F = angles[:, 0], angles[:, 1], angles[:, 2]
    sP, cP, sT, cT, sF, cF = np.sin(P), np.cos(P), np.sin(T), np.cos(T), np.sin(F), np.cos(F)
    z = np.zeros_like(P)
    e_psi = np.stack([-sP, cP * cT, cP * sT * cF, cP * sT * sF], -1)
    e_theta = np.stack([z, -sT, cT * cF, cT * sF], -1)
    e_phi = np.stack([z, z, -sF, cF], -1)
    return np.stack([e_psi, e_theta, e_phi], -1)  # (N, 4, 3)


def _neighbours(mesh):
    n_psi, n_theta, n_phi = mesh.refinement
    gi = mesh.grid_index
    offs = [(a, b, c) for a in (-1, 0, 1) for b in (-1, 0, 1) for c in (-1, 0, 1) if (a, b, c) != (0, 0, 0)]
    nbr = np.full((len(mesh), len(offs)), -1, dtype=np.int64)
    for n, (a, b, c) in enumerate(offs):
        i, j, k = gi[:, 0] + a, gi[:, 1] + b, (gi[:, 2] + c) % n_phi
        ok = (i >= 0) & (i < n_psi) & (j >= 0) & (j < n_theta)
        nbr[ok, n] = mesh.slot[i[ok], j[ok], k[ok]]
    return nbr


def _local_correction(mesh: SurfaceMesh, sub: int = 6):
    """Near-field correction data ``(nbr, B, M0)``.

    For a density f, ``sum_n B[t, n] (f(nbr[t, n]) - f(t))`` replaces the
    near-field midpoint terms by a sub-cell rule applied to the linear part
    of f, fitted by least squares (linear + quadratic terms in tangent
    coordinates) over the 26 index neighbours.  ``M0[t]`` is the same
    replacement for the kernel alone, including the omitted cell.
    """
    c = mesh.cache
    key = ("correction", sub)
    if key in c:
        return c[key]
    n_psi, n_theta, n_phi = mesh.refinement
    steps = np.array([math.pi / n_psi, math.pi / n_theta, 2 * math.pi / n_phi])
    targets = np.arange(len(mesh), dtype=np.int64)
    M = _quad.near_moments(mesh.angles, mesh.grid_index, mesh.slot, mesh.nodes, mesh.weights, steps, sub, targets)

    nbr = _neighbours(mesh)
    valid = nbr >= 0
    E = _tangent_frame(mesh.angles)
    D = np.where(valid[..., None], mesh.nodes[np.maximum(nbr, 0)] - mesh.nodes[:, None, :], 0.0)
    y = np.einsum("nki,nia->nka", D, E)
    quad = np.stack([y[..., 0] ** 2, y[..., 1] ** 2, y[..., 2] ** 2,
                     y[..., 0] * y[..., 1], y[..., 0] * y[..., 2], y[..., 1] * y[..., 2]], -1)
    A = np.concatenate([y, quad], -1) * valid[..., None]
    pinv = np.linalg.pinv(A, rcond=1e-10)  # (N, 9, 26)
    grad = np.einsum("nia,nak->nik", E, pinv[:, :3, :])  # ambient gradient stencil (N, 4, 26)
    B = np.einsum("nik,niq->nkq", grad, M[:, :4])
    c[key] = (nbr, np.ascontiguousarray(B), np.ascontiguousarray(M[:, 4]))
    return c[key]


def _check_rule(rule):
    if rule not in RULES:
        raise ValueError(f"unknown principal-value rule {rule!r}; expected one of {RULES}")


def pv_sum(mesh: SurfaceMesh, values, targets=None, rule: str = "corrected"):
    """Principal value sum_{xi != t} w K(xi - t) n_psi(xi) (f(xi) - f(t)) at nodes."""
    _check_rule(rule)
    t = _targets(mesh, targets)
    F = np.ascontiguousarray(values, dtype=float)
    out = _kn_sum(mesh, F, mesh.nodes[t], omit=t, subtract=F[t])
    if rule == "corrected":
        nbr, B, _ = _local_correction(mesh)
        out += _quad.stencil_apply(nbr[t], B[t], F, t)
    return out


def _values(f):
    return f.values if isinstance(f, BoundaryField) else np.asarray(f, dtype=float)


def cauchy_integral(mesh: SurfaceMesh, f, q) -> Quaternion:
    """Quadrature of  int K(xi - q) n_psi(xi) f(xi) dH^3  for q off the surface."""
    q = q.to_array() if isinstance(q, Quaternion) else np.asarray(q, dtype=float)
    dist = abs(float(np.linalg.norm(q)) - 1.0)
    limit = 2 * mesh.max_cell_diameter
    if dist <= limit:
        raise AccuracyError(f"point at distance {dist:.4g} from the surface; quadrature needs > {limit:.4g}")
    return Quaternion.from_array(_kn_sum(mesh, _values(f), q[None])[0])


def cauchy_integral_values(mesh: SurfaceMesh, f, points):
    """Unchecked vectorized Cauchy integral at an (M, 4) array of points."""
    return _kn_sum(mesh, _values(f), points)


def singular_cauchy_values(mesh: SurfaceMesh, f, targets=None, rule="corrected", form="subtracted"):
    """S f at node indices, in one of two algebraically equal forms:

    ``"subtracted"``:  2 PV int K n (f(xi) - f(t)) + f(t)
    ``"alpha"``:       2 PV int K n f(xi) + (1 - alpha(t)) f(t)
    """
    if form not in FORMS:
        raise ValueError(f"unknown form {form!r}; expected one of {FORMS}")
    F = _values(f)
    t = _targets(mesh, targets)
    if form == "subtracted":
        return 2 * pv_sum(mesh, F, t, rule) + F[t]
    _check_rule(rule)
    direct = _kn_sum(mesh, F, mesh.nodes[t], omit=t)
    if rule == "corrected":
        nbr, B, M0 = _local_correction(mesh)
        direct += _quad.stencil_apply(nbr[t], B[t], np.ascontiguousarray(F), t) + qmul(M0[t], F[t])
    rest = -alpha_values(mesh, t, rule)
    rest[:, 0] += 1.0
    return 2 * direct + qmul(rest, F[t])


def singular_cauchy(mesh: SurfaceMesh, f, t: int, rule="corrected") -> Quaternion:
    return Quaternion.from_array(singular_cauchy_values(mesh, f, [t], rule)[0])


def alpha_values(mesh: SurfaceMesh, targets=None, rule="corrected"):
    """alpha(t) = 2 PV int K n dH^3 as (M, 4) quaternions.

    ``"omit"`` drops the singular cell; ``"corrected"`` also adds the
    sub-cell near-field term, which restores the omitted cell's share.
    """
    _check_rule(rule)
    t = _targets(mesh, targets)
    c = mesh.cache
    ones = np.zeros((len(mesh), 4))
    ones[:, 0] = 1.0
    if targets is None and "alpha" not in c:
        c["alpha"] = 2 * _kn_sum(mesh, ones, mesh.nodes, omit=t)
    a = c["alpha"][t] if "alpha" in c else 2 * _kn_sum(mesh, ones, mesh.nodes[t], omit=t)
    if rule == "corrected":
        a = a + 2 * _local_correction(mesh)[2][t]
    return a


def alpha(mesh: SurfaceMesh, t: int, rule="corrected"):
    """Return (scalar part, vector part) of alpha at node t."""
    a = alpha_values(mesh, [t], rule)[0]
    return float(a[0]), a[1:].copy()


def closest_constant(value: float, candidates=(0.5, 1.0)) -> float:
    return min(candidates, key=lambda c: abs(value - c))


# ---------------------------------------------------------------------------
# Sokhotski-Plemelj


@dataclass
class PlemeljTable:
    node: int
    distances: np.ndarray
    inner_error: np.ndarray  # |C(t(1-d)) - (S f + f)/2| per distance
    outer_error: np.ndarray  # |C(t(1+d)) - (S f - f)/2|
    jump_error: np.ndarray  # |C(t(1-d)) - C(t(1+d)) - f(t)|
    inner_limit_error: float  # same, for the values extrapolated to d = 0
    outer_limit_error: float
    jump_limit_error: float


def _near_cauchy(mesh, F, t_idx, points, inside):
    # C[f](q) = int K n (f - f(t)) + chi(q) f(t), chi = 1 inside, 0 outside:
    # the subtracted integrand stays bounded as q approaches t.
    ft = F[t_idx]
    out = _kn_sum(mesh, F, points, subtract=np.broadcast_to(ft, points.shape))
    return out + ft if inside else out


def default_plemelj_distances(mesh: SurfaceMesh, count: int = 6):
    """Decreasing radial offsets from 3.5 to 1 cell widths (capped at 0.6)."""
    h = math.pi / mesh.refinement[0]
    return np.linspace(min(3.5 * h, 0.6), h, count)


def plemelj_check(mesh: SurfaceMesh, f, t: int, distances=None, rule="corrected", degree: int = 3) -> PlemeljTable:
    """Compare one-sided Cauchy integrals along the normal with (S f +- f)/2.

    Limits d -> 0 are estimated by a least-squares polynomial of the given
    degree through the sampled distances.
    """
    F = _values(f)
    d = default_plemelj_distances(mesh) if distances is None else np.asarray(distances, dtype=float)
    if np.any(np.diff(d) >= 0) or np.any(d <= 0) or np.any(d >= 1):
        raise ValueError("distances must be decreasing and lie in (0, 1)")
    x = mesh.nodes[t]
    S = singular_cauchy_values(mesh, F, [t], rule)[0]
    ft = F[t]
    cin = np.array([_near_cauchy(mesh, F, t, (x * (1 - di))[None], True)[0] for di in d])
    cout = np.array([_near_cauchy(mesh, F, t, (x * (1 + di))[None], False)[0] for di in d])
    want_in, want_out = 0.5 * (S + ft), 0.5 * (S - ft)
    deg = min(degree, len(d) - 1)
    V = np.vander(d, deg + 1)
    lim_in = np.linalg.lstsq(V, cin, rcond=None)[0][-1]
    lim_out = np.linalg.lstsq(V, cout, rcond=None)[0][-1]
    n = lambda a: np.linalg.norm(a, axis=-1)
    return PlemeljTable(
        node=int(t),
        distances=d,
        inner_error=n(cin - want_in),
        outer_error=n(cout - want_out),
        jump_error=n(cin - cout - ft),
        inner_limit_error=float(n(lim_in - want_in)),
        outer_limit_error=float(n(lim_out - want_out)),
        jump_limit_error=float(n(lim_in - lim_out - ft)),
    )


# ---------------------------------------------------------------------------
# complex form: K n = K1 + K2 j


def k1k2_split(xi, z, n):
    """K1, K2 with K(xi - z) n_psi(n) = K1 + K2 j, from the complex-coordinate formulas."""
    xi = np.asarray(xi, dtype=float)
    z = np.asarray(z, dtype=float)
    n = np.asarray(n, dtype=float)
    e1 = (xi[..., 0] - z[..., 0]) + 1j * (xi[..., 1] - z[..., 1])
    e2 = (xi[..., 2] - z[..., 2]) + 1j * (xi[..., 3] - z[..., 3])
    r2 = np.abs(e1) ** 2 + np.abs(e2) ** 2
    if np.any(r2 == 0):
        raise SingularityError("coincident points in k1k2_split")
    m1 = n[..., 0] + 1j * n[..., 1]
    m2 = n[..., 2] + 1j * n[..., 3]
    den = TWO_PI2 * r2 ** 2
    k1 = (np.conj(e1) * m1 + np.conj(e2) * m2) / den
    k2 = (np.conj(e2) * np.conj(m1) - np.conj(e1) * np.conj(m2)) / den
    return k1, k2


def _k12_sums(mesh, u, targets, rule):
    """(sum w K1(xi - t) u(xi), sum w K2(xi - t) conj u(xi)) over xi != t."""
    _check_rule(rule)
    g = _geom(mesh)
    u = np.ascontiguousarray(u, dtype=complex)
    A, B = _quad.k12_apply(g["z1"], g["z2"], mesh.normals, mesh.weights, u, g["z1"][targets], g["z2"][targets], targets)
    if rule == "corrected":
        nbr, W, M0 = _local_correction(mesh)
        # (b1 + b2 j) u = b1 u + b2 conj(u) j
        corr = _quad.stencil_apply(nbr[targets], W[targets], from_pair_arrays(u, np.zeros_like(u)), targets)
        m0 = M0[targets]
        A = A + corr[:, 0] + 1j * corr[:, 1] + (m0[:, 0] + 1j * m0[:, 1]) * u[targets]
        B = B + corr[:, 2] + 1j * corr[:, 3] + (m0[:, 2] + 1j * m0[:, 3]) * np.conj(u[targets])
    return A, B


def apply_N(mesh: SurfaceMesh, f, which: int, targets=None, rule="corrected"):
    """N1 f = 2 int K1 f + (1 - alpha) f;  N2 f = -2 int K2 conj(f) + (1 - alpha) conj(f)."""
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    f = np.asarray(f, dtype=complex)
    t = _targets(mesh, targets)
    a = alpha_values(mesh, t, rule)[:, 0]
    A, B = _k12_sums(mesh, f, t, rule)
    if which == 1:
        return 2 * A + (1 - a) * f[t]
    return -2 * B + (1 - a) * np.conj(f[t])


def apply_N_pair(mesh: SurfaceMesh, f, targets=None, rule="corrected"):
    """(N1 f, N2 f) from a single pass over the sources."""
    f = np.asarray(f, dtype=complex)
    t = _targets(mesh, targets)
    a = alpha_values(mesh, t, rule)[:, 0]
    A, B = _k12_sums(mesh, f, t, rule)
    return 2 * A + (1 - a) * f[t], -2 * B + (1 - a) * np.conj(f[t])


def op_N(mesh: SurfaceMesh, f, which: int, t: int, rule="corrected") -> complex:
    return complex(apply_N(mesh, f, which, [t], rule)[0])


@dataclass
class NIdentityReport:
    nodes: np.ndarray
    n1_residual: float  # max |(N1^2 - N2^2) f - f| / |f|_inf
    n2_residual: float  # max |(N1 N2 + N2 N1) f| / |f|_inf
    n2sq_size: float  # max |N2^2 f| / |f|_inf


def n_identities(mesh: SurfaceMesh, f, nodes, rule="corrected") -> NIdentityReport:
    f = np.asarray(f, dtype=complex)
    nodes = np.asarray(nodes, dtype=np.int64)
    N1f, N2f = apply_N_pair(mesh, f, None, rule)
    N1N1, N2N1 = apply_N_pair(mesh, N1f, nodes, rule)
    N1N2, N2N2 = apply_N_pair(mesh, N2f, nodes, rule)
    scale = np.abs(f).max()
    return NIdentityReport(
        nodes=nodes,
        n1_residual=float(np.abs(N1N1 - N2N2 - f[nodes]).max() / scale),
        n2_residual=float(np.abs(N1N2 + N2N1).max() / scale),
        n2sq_size=float(np.abs(N2N2).max() / scale),
    )


# ---------------------------------------------------------------------------
# iterated integrals


def _cell_scale(mesh):
    return math.pi / mesh.refinement[0]


def iterated_kernel_zero(mesh: SurfaceMesh, t: int, xi: int) -> Quaternion:
    """int_tau K(tau - t) n_psi(tau) K(tau - xi) dH^3, omitting both singular cells."""
    x = mesh.nodes
    if np.linalg.norm(x[t] - x[xi]) < 3 * _cell_scale(mesh):
        raise ValueError("singular nodes closer than three cells")
    keep = np.ones(len(mesh), bool)
    keep[[t, xi]] = False
    tau = x[keep]
    a = kernel_normal(tau, x[t], mesh.normals[keep]) * mesh.weights[keep, None]
    return Quaternion.from_array(qmul(a, kernel_array(tau - x[xi])).sum(0))


class TwoPointField:
    """Lazy f(xi, tau) over node indices; ``fn`` maps point arrays to (..., 4)."""

    def __init__(self, mesh: SurfaceMesh, fn):
        self.mesh = mesh
        self.fn = fn

    def __call__(self, xi_idx, tau_idx):
        x = self.mesh.nodes
        a, b = np.broadcast_arrays(np.asarray(xi_idx), np.asarray(tau_idx))
        return np.asarray(self.fn(x[a], x[b]), dtype=float)


@dataclass
class PBReport:
    node: int
    lhs: np.ndarray
    rhs: np.ndarray
    alpha: float
    f_tt: np.ndarray
    residual: float  # |lhs - rhs - alpha^2 f(t,t)|

    @property
    def correction(self):
        return self.alpha ** 2 * self.f_tt

    @property
    def relative_residual(self) -> float:
        return self.residual / float(np.linalg.norm(self.correction))

    @property
    def order_gap(self) -> float:
        """|lhs - rhs|, the part attributable to exchanging the integrations."""
        return float(np.linalg.norm(self.lhs - self.rhs))


def _iterated_pair(mesh, F, t):
    """tau-outer and xi-outer iterated sums of
    K(tau - t) n(tau) K(xi - tau) n(xi) [f(xi, tau) - f(tau, t)]."""
    x = mesh.nodes
    w = mesh.weights
    npsi = _geom(mesh)["psi_normals"]
    N = len(mesh)
    idx = np.arange(N)
    kt = kernel_normal(np.delete(x, t, 0), x[t], np.delete(mesh.normals, t, 0))
    kt_full = np.zeros((N, 4))
    kt_full[idx != t] = kt
    lhs = np.zeros(4)
    for tau in range(N):
        if tau == t:
            continue
        sel = idx != tau
        xi = idx[sel]
        inner = qmul(kernel_normal(x[xi], x[tau], mesh.normals[xi]), F(xi, tau) - F(tau, t))
        lhs += w[tau] * qmul(kt_full[tau], (inner * w[xi, None]).sum(0))
    rhs = np.zeros(4)
    for xi in range(N):
        if xi == t:
            continue
        tau = idx[(idx != t) & (idx != xi)]
        a = qmul(kt_full[tau], kernel_array(x[xi] - x[tau]))
        a = qmul(a, np.broadcast_to(npsi[xi], a.shape))
        rhs += w[xi] * (qmul(a, F(xi, tau) - F(tau, t)) * w[tau, None]).sum(0)
    return lhs, rhs


def poincare_bertrand_residual(mesh: SurfaceMesh, F, t: int) -> PBReport:
    """Both iterated principal-value sums with singular cells omitted, against
    the correction alpha^2(t) f(t, t)."""
    lhs, rhs = _iterated_pair(mesh, F, t)
    a = alpha(mesh, t)[0]
    ftt = F(t, t)
    return PBReport(node=int(t), lhs=lhs, rhs=rhs, alpha=a, f_tt=ftt,
                    residual=float(np.linalg.norm(lhs - rhs - a * a * ftt)))


@dataclass
class CompositionReport:
    nodes: np.ndarray
    s_tilde: np.ndarray  # S~ f at the nodes
    s_tilde2: np.ndarray  # S~^2 f
    target: np.ndarray  # 4 alpha^2 f
    relative_error: np.ndarray

    @property
    def max_relative_error(self) -> float:
        return float(self.relative_error.max())


def composition_check(mesh: SurfaceMesh, f, nodes, rule="corrected") -> CompositionReport:
    """S~ f(t) = 2 PV int K(xi - t) n(xi) (f(xi) - f(t)), applied twice."""
    F = _values(f)
    nodes = np.asarray(nodes, dtype=np.int64)
    st_all = 2 * pv_sum(mesh, F, None, rule)
    st2 = 2 * pv_sum(mesh, st_all, nodes, rule)
    a = alpha_values(mesh, nodes, rule)[:, 0]
    target = 4 * (a ** 2)[:, None] * F[nodes]
    rel = np.linalg.norm(st2 - target, axis=1) / np.linalg.norm(target, axis=1)
    return CompositionReport(nodes, st_all[nodes], st2, target, rel)


@dataclass
class K2Report:
    node: int
    kernel_only: complex  # double integral of K2(tau - t) conj K2(xi - tau)
    fubini_discrepancy: float  # |tau-outer - xi-outer| for the test density


def k2_double_zero(mesh: SurfaceMesh, F, t: int) -> K2Report:
    """Pure-K2 iterated integrals.  ``F(xi_idx, tau_idx)`` returns complex values."""
    g = _geom(mesh)
    N = len(mesh)
    idx = np.arange(N)
    x = mesh.nodes
    w = mesh.weights
    ones = np.ones(N, dtype=complex)
    _, Bsum = _quad.k12_apply(g["z1"], g["z2"], mesh.normals, w, ones, g["z1"], g["z2"], idx.astype(np.int64))
    others = idx[idx != t]
    _, k2t = k1k2_split(x[others], x[t], mesh.normals[others])
    kernel_only = complex(np.sum(w[others] * k2t * np.conj(Bsum[others])))

    k2t_full = np.zeros(N, dtype=complex)
    k2t_full[others] = k2t
    lhs = 0j
    for tau in others:
        xi = idx[idx != tau]
        _, k2 = k1k2_split(x[xi], x[tau], mesh.normals[xi])
        lhs += w[tau] * k2t_full[tau] * np.sum(w[xi] * np.conj(k2) * (F(xi, tau) - F(tau, t)))
    rhs = 0j
    for xi in others:
        tau = idx[(idx != t) & (idx != xi)]
        _, k2 = k1k2_split(x[xi], x[tau], np.broadcast_to(mesh.normals[xi], (len(tau), 4)))
        rhs += w[xi] * np.sum(w[tau] * k2t_full[tau] * np.conj(k2) * (F(xi, tau) - F(tau, t)))
    return K2Report(node=int(t), kernel_only=kernel_only, fubini_discrepancy=abs(lhs - rhs))


def involution_error(mesh: SurfaceMesh, f, nodes, rule="corrected", form="subtracted") -> float:
    """max over nodes of |S^2 f - f| / |f|_inf."""
    F = _values(f)
    nodes = np.asarray(nodes, dtype=np.int64)
    S = singular_cauchy_values(mesh, F, None, rule, form)
    S2 = singular_cauchy_values(mesh, S, nodes, rule, form)
    return float(np.linalg.norm(S2 - F[nodes], axis=1).max() / np.linalg.norm(F, axis=1).max())
