import math

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from hypernum import _quad
from hypernum import singular as sg
from hypernum.hquat import Quaternion, from_pair_arrays, qmul
from hypernum.surface import antipodal_node, build_sphere_mesh, equatorial_nodes, nearest_node


def _unit(rng, n):
    x = rng.normal(size=(n, 4))
    return x / np.linalg.norm(x, axis=1)[:, None]


def _field(x):
    z = np.zeros(len(x))
    return np.stack([x[:, 0] * x[:, 1] + 0.5, z, x[:, 2], x[:, 3] ** 2], 1)


# -- kernel -----------------------------------------------------------------


def test_kernel_examples():
    c = 1 / (2 * math.pi ** 2)
    np.testing.assert_allclose(sg.cauchy_kernel(Quaternion(1)).to_array(), [c, 0, 0, 0], rtol=1e-15)
    np.testing.assert_allclose(sg.cauchy_kernel(Quaternion(0, 0, 1)).to_array(), [0, 0, c, 0], rtol=1e-15)
    with pytest.raises(sg.SingularityError):
        sg.cauchy_kernel(Quaternion())


def test_kernel_matches_complex_pair_formula():
    q = np.random.default_rng(0).normal(size=(500, 4))
    z1 = q[:, 0] + 1j * q[:, 1]
    z2 = q[:, 2] + 1j * q[:, 3]
    r2 = np.abs(z1) ** 2 + np.abs(z2) ** 2
    want = from_pair_arrays(np.conj(z1), np.conj(z2)) / (2 * math.pi ** 2 * r2[:, None] ** 2)
    np.testing.assert_allclose(sg.kernel_array(q), want, rtol=1e-13)


def test_kernel_is_annihilated_symbolically():
    x = sympy.symbols("x0:4", real=True)
    r4 = (x[0] ** 2 + x[1] ** 2 + x[2] ** 2 + x[3] ** 2) ** 2
    Kq = sympy.Quaternion(x[0] / r4, -x[1] / r4, x[2] / r4, -x[3] / r4)
    psi = [sympy.Quaternion(1, 0, 0, 0), sympy.Quaternion(0, 1, 0, 0),
           sympy.Quaternion(0, 0, -1, 0), sympy.Quaternion(0, 0, 0, 1)]
    total = sympy.Quaternion(0, 0, 0, 0)
    for k in range(4):
        d = sympy.Quaternion(*(sympy.diff(c, x[k]) for c in (Kq.a, Kq.b, Kq.c, Kq.d)))
        total = total + psi[k] * d
    point = dict(zip(x, (sympy.Rational(1, 3), sympy.Rational(-2, 5), sympy.Rational(3, 7), sympy.Rational(1, 2))))
    assert all(sympy.simplify(c.subs(point)) == 0 for c in (total.a, total.b, total.c, total.d))


def test_k1k2_recombine():
    rng = np.random.default_rng(4)
    xi, z, n = rng.normal(size=(3, 1000, 4))
    k1, k2 = sg.k1k2_split(xi, z, n)
    np.testing.assert_allclose(from_pair_arrays(k1, k2), sg.kernel_normal(xi, z, n), rtol=1e-12, atol=1e-14)


def test_k1k2_hand_value():
    e1 = np.array([1.0, 0, 0, 0])
    k1, k2 = sg.k1k2_split(e1, -e1, e1)
    assert abs(k1 - 1 / (16 * math.pi ** 2)) < 1e-15 and k2 == 0
    with pytest.raises(sg.SingularityError):
        sg.k1k2_split(e1, e1, e1)


def test_scalar_part_on_sphere():
    rng = np.random.default_rng(5)
    x, t = _unit(rng, 200), _unit(rng, 200)
    kn = sg.kernel_normal(x, t, x)
    np.testing.assert_allclose(kn[:, 0], 1 / (4 * math.pi ** 2 * np.sum((x - t) ** 2, 1)), rtol=1e-12)


# -- grid operator ------------------------------------------------------------


def test_constant_grid_field_has_zero_residual():
    f = sg.GridField4D.from_function(lambda p: np.broadcast_to([1.0, 2, -3, 4], p.shape), (0, 0, 0, 0), 0.1, 6)
    real, cplx = sg.psi_d_residual(f)
    assert np.abs(real.values).max() == 0 and np.abs(cplx.values).max() == 0
    assert sg.cimmino_residual(f) == (0.0, 0.0)


def test_fundamental_solution_order():
    r = sg.fundamental_solution_order((0, 0, 0, 1), spacing=0.05, n=17)
    assert r["order"] >= 1.9
    assert r["forms_agree"] < 1e-12


def test_non_holomorphic_residual_stays():
    fn = lambda p: np.stack([p[..., 0], -p[..., 1], 0 * p[..., 0], 0 * p[..., 0]], -1)  # u = conj z1
    res = [np.abs(sg.psi_d_residual(sg.GridField4D.from_function(fn, (0, 0, 0, 0), h, 7))[0].values).max()
           for h in (0.1, 0.05, 0.025)]
    assert min(res) > 1.0


def test_grid_too_small():
    with pytest.raises(ValueError):
        sg.psi_d_residual(sg.GridField4D(np.zeros((4, 5, 5, 5, 4)), 0.1))


# -- boundary operators -------------------------------------------------------


def _dense_pv(mesh, F, t):
    out = np.zeros((len(t), 4))
    for a, ti in enumerate(t):
        mask = np.arange(len(mesh)) != ti
        kn = sg.kernel_normal(mesh.nodes[mask], mesh.nodes[ti], mesh.normals[mask])
        out[a] = (qmul(kn, F[mask] - F[ti]) * mesh.weights[mask, None]).sum(0)
    return out


def test_pv_sum_matches_dense_oracle(mesh8):
    F = _field(mesh8.nodes)
    t = np.array([0, 100, 517, 1023])
    np.testing.assert_allclose(sg.pv_sum(mesh8, F, t, rule="omit"), _dense_pv(mesh8, F, t), rtol=1e-11, atol=1e-13)


def test_constant_density_is_reproduced(mesh8):
    F = np.tile([0.3, -1.0, 2.0, 0.5], (len(mesh8), 1))
    for rule in sg.RULES:
        np.testing.assert_array_equal(sg.singular_cauchy_values(mesh8, F, rule=rule), F)


def test_two_forms_of_singular_operator_agree(mesh12):
    F = _field(mesh12.nodes)
    for rule in sg.RULES:
        a = sg.singular_cauchy_values(mesh12, F, rule=rule)
        b = sg.singular_cauchy_values(mesh12, F, rule=rule, form="alpha")
        np.testing.assert_allclose(a, b, atol=1e-12)
    with pytest.raises(ValueError):
        sg.singular_cauchy_values(mesh12, F, form="plain")


def test_unknown_rule(mesh8):
    with pytest.raises(ValueError):
        sg.pv_sum(mesh8, np.zeros((len(mesh8), 4)), rule="trapezoid")


def test_relabelling_invariance(mesh8):
    perm = np.random.default_rng(7).permutation(len(mesh8))
    pm = mesh8.permuted(perm)
    F = _field(mesh8.nodes)
    base = sg.singular_cauchy_values(mesh8, F)
    moved = sg.singular_cauchy_values(pm, F[perm])
    np.testing.assert_allclose(moved, base[perm], rtol=0, atol=1e-12)
    np.testing.assert_allclose(sg.alpha_values(pm), sg.alpha_values(mesh8)[perm], atol=1e-12)


def test_worker_count_does_not_change_results():
    F = _field(build_sphere_mesh(10, 10, 20).nodes)
    out = []
    for w in (1, 3):
        _quad.set_workers(w)
        out.append(sg.singular_cauchy_values(build_sphere_mesh(10, 10, 20), F))
    _quad.set_workers(1)
    assert np.array_equal(out[0], out[1])


def test_cauchy_integral_unit_density():
    errs = []
    for n in (12, 16, 24):
        mesh = build_sphere_mesh(n, n, 2 * n)
        one = np.zeros((len(mesh), 4))
        one[:, 0] = 1
        errs.append(abs(sg.cauchy_integral(mesh, one, [0, 0, 0, 0]) - 1))
        assert abs(sg.cauchy_integral(mesh, one, [3, 0, 0, 0])) < 1e-10
    assert errs[0] > errs[1] > errs[2]


def test_cauchy_integral_refuses_near_points(mesh8):
    one = np.zeros((len(mesh8), 4))
    with pytest.raises(sg.AccuracyError, match="distance"):
        sg.cauchy_integral(mesh8, one, [1.05, 0, 0, 0])


def test_alpha_is_one_on_sphere():
    # int_{S^3} |x - t|^-2 = 2 pi^2, so 2 PV int K n = 2 * 2 pi^2 / (4 pi^2) = 1
    mesh = build_sphere_mesh(16, 16, 32)
    a = sg.alpha_values(mesh, equatorial_nodes(mesh, 10))
    assert np.abs(a[:, 0] - 1).max() < 0.01
    assert np.abs(a[:, 1:]).max() < 1e-3
    assert sg.closest_constant(a[:, 0].mean()) == 1.0
    plain = sg.alpha(mesh, int(equatorial_nodes(mesh, 1)[0]), rule="omit")[0]
    assert plain < a[:, 0].min()


def test_plemelj_unit_density(mesh12):
    one = np.zeros((len(mesh12), 4))
    one[:, 0] = 1
    tab = sg.plemelj_check(mesh12, one, nearest_node(mesh12, (0, 0, 1, 0)))
    assert tab.jump_limit_error < 1e-2 and tab.inner_limit_error < 1e-2 and tab.outer_limit_error < 1e-2


def test_plemelj_rejects_bad_distances(mesh8):
    with pytest.raises(ValueError):
        sg.plemelj_check(mesh8, _field(mesh8.nodes), 0, distances=[0.1, 0.2])


def _dense_N(mesh, u, t):
    A = np.zeros(len(t), complex)
    B = np.zeros(len(t), complex)
    for a, ti in enumerate(t):
        m = np.arange(len(mesh)) != ti
        k1, k2 = sg.k1k2_split(mesh.nodes[m], mesh.nodes[ti], mesh.normals[m])
        A[a] = np.sum(mesh.weights[m] * k1 * u[m])
        B[a] = np.sum(mesh.weights[m] * k2 * np.conj(u[m]))
    al = sg.alpha_values(mesh, t, rule="omit")[:, 0]
    return 2 * A + (1 - al) * u[t], -2 * B + (1 - al) * np.conj(u[t])


def test_N_operators_match_dense_oracle(mesh8):
    x = mesh8.nodes
    u = np.exp(x[:, 0]) + 1j * x[:, 2] * x[:, 3]
    t = np.array([3, 400, 900])
    n1, n2 = _dense_N(mesh8, u, t)
    np.testing.assert_allclose(sg.apply_N(mesh8, u, 1, t, rule="omit"), n1, rtol=1e-11)
    np.testing.assert_allclose(sg.apply_N(mesh8, u, 2, t, rule="omit"), n2, rtol=1e-11)
    with pytest.raises(ValueError):
        sg.apply_N(mesh8, u, 3)


def test_N_identities_coarse(mesh12):
    x = mesh12.nodes
    u = np.exp(x[:, 0]) + 1j * x[:, 2] * x[:, 3] + 0.5 * x[:, 3]
    rep = sg.n_identities(mesh12, u, equatorial_nodes(mesh12, 10))
    assert rep.n1_residual < 0.07 and rep.n2_residual < 0.07
    assert rep.n2sq_size > 3 * rep.n2_residual


def test_involution_coarse(mesh12):
    nodes = equatorial_nodes(mesh12, 10)
    assert sg.involution_error(mesh12, _field(mesh12.nodes), nodes) < 0.06


# -- iterated integrals -------------------------------------------------------


def test_iterated_kernel_antipodal_vanishes(mesh12):
    t = nearest_node(mesh12, (0, 0, 1, 0))
    v = sg.iterated_kernel_zero(mesh12, t, antipodal_node(mesh12, t))
    assert abs(v) < 1e-12 * abs(sg.cauchy_kernel(2 * mesh12.nodes[t]))
    with pytest.raises(ValueError):
        sg.iterated_kernel_zero(mesh12, t, t)


def test_pb_constant_field_sums_vanish(mesh8):
    F = sg.TwoPointField(mesh8, lambda a, b: np.broadcast_to([1.0, 0.5, 0, 0], a.shape))
    r = sg.poincare_bertrand_residual(mesh8, F, nearest_node(mesh8, (0, 0, 1, 0)))
    assert np.abs(r.lhs).max() == 0 and np.abs(r.rhs).max() == 0
    assert math.isclose(r.residual, r.alpha ** 2 * math.hypot(1, 0.5), rel_tol=1e-12)


def test_composition_constant_field(mesh8):
    one = np.zeros((len(mesh8), 4))
    one[:, 0] = 1
    rep = sg.composition_check(mesh8, one, [0, 10])
    assert np.abs(rep.s_tilde).max() == 0 and np.abs(rep.s_tilde2).max() == 0
    assert np.all(rep.relative_error == 1.0)


def test_k2_constant_density_order_exchange(mesh8):
    rep = sg.k2_double_zero(mesh8, lambda xi, tau: np.full(np.broadcast(xi, tau).shape, 2.0 + 1j), 5)
    assert rep.fubini_discrepancy == 0.0


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1023), st.floats(-3, 3), st.floats(-3, 3))
def test_singular_operator_is_linear(t, a, b):
    mesh = build_sphere_mesh(8, 8, 16)
    F = _field(mesh.nodes)
    G = mesh.nodes ** 2
    lhs = sg.singular_cauchy_values(mesh, a * F + b * G, [t])
    rhs = a * sg.singular_cauchy_values(mesh, F, [t]) + b * sg.singular_cauchy_values(mesh, G, [t])
    np.testing.assert_allclose(lhs, rhs, atol=1e-10 * (1 + abs(a) + abs(b)))
