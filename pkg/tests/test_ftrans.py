import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypernum import ftrans


@pytest.mark.parametrize("shape", ftrans.SHAPES)
def test_ruspini(shape):
    p = ftrans.uniform_partition(11, 0.1, shape)
    x = np.linspace(*p.interval, 10_001)
    assert np.abs(p.basis(x).sum(0) - 1).max() < 1e-12


def test_triangular_taps_closed_form():
    p = ftrans.uniform_partition(5, 1.0)
    x = p.nodes[2] + 0.25 * np.arange(-4, 5)
    np.testing.assert_allclose(p.basis(x)[2], [0, 0.25, 0.5, 0.75, 1, 0.75, 0.5, 0.25, 0], atol=1e-15)
    k = ftrans.ft_kernel(p, 0, 0.25)
    np.testing.assert_allclose(k.taps, np.array([0, 1, 2, 3, 4, 3, 2, 1, 0]) / 16, atol=1e-15)


def test_partition_validation():
    with pytest.raises(ValueError):
        ftrans.uniform_partition(2, 0.1)
    with pytest.raises(ValueError):
        ftrans.uniform_partition(5, 0.0)
    with pytest.raises(ValueError):
        ftrans.uniform_partition(5, 0.1, "gaussian")


def _grid(p, spacing):
    a, b = p.interval
    return a + spacing * np.arange(int(round((b - a) / spacing)) + 1)


@pytest.mark.parametrize("shape", ftrans.SHAPES)
def test_polynomial_reproduction(shape):
    p = ftrans.uniform_partition(9, 0.2, shape, x0=-0.8)
    x = _grid(p, 0.025)
    c = ftrans.ft_components(x, np.full_like(x, 3.0), p, 2)
    assert np.abs(c[:, 0] - 3).max() < 1e-12 and np.abs(c[:, 1:]).max() < 1e-10
    assert np.abs(ftrans.ft_components(x, x, p, 1)[1:-1, 1] - 1).max() < 1e-10
    assert np.abs(ftrans.ft_components(x, x ** 2, p, 2)[1:-1, 2] - 1).max() < 1e-8


def test_components_match_weighted_polyfit():
    # independent oracle: numpy's weighted least squares (weights enter squared)
    p = ftrans.uniform_partition(7, 0.3, "raised_cosine")
    x = _grid(p, 0.05)
    f = np.cos(2 * x) + x ** 3
    c = ftrans.ft_components(x, f, p, 2)
    A = p.basis(x)
    for k in range(1, 6):
        sel = A[k] > 0
        ref = np.polynomial.polynomial.polyfit(x[sel] - p.nodes[k], f[sel], 2, w=np.sqrt(A[k, sel]))
        np.testing.assert_allclose(c[k], ref, rtol=1e-9, atol=1e-12)


def test_too_few_samples():
    p = ftrans.uniform_partition(5, 1.0)
    with pytest.raises(np.linalg.LinAlgError):
        ftrans.ft_components(p.nodes, p.nodes ** 2, p, 2)


@pytest.mark.parametrize("shape", ftrans.SHAPES)
def test_kernel_equals_least_squares(shape):
    p = ftrans.uniform_partition(11, 0.1, shape)
    x = _grid(p, 0.025)
    f = np.sin(3 * x) + x ** 2
    centers = np.arange(1, 10) * 4
    for deg in range(3):
        k = ftrans.ft_kernel(p, deg, 0.025)
        direct = ftrans.ft_components(x, f, p, deg)[1:-1, deg]
        assert np.abs(ftrans.apply_kernel(k, f, centers) - direct).max() < 1e-12 * max(1, np.abs(direct).max())


@pytest.mark.parametrize("shape", ftrans.SHAPES)
def test_kernel_signatures(shape):
    p = ftrans.uniform_partition(11, 0.1, shape)
    k0, k1, k2 = (ftrans.ft_kernel(p, d, 0.025).taps for d in range(3))
    assert k0.min() >= 0 and abs(k0.sum() - 1) < 1e-12 and np.allclose(k0, k0[::-1], atol=1e-15)
    assert abs(k1.sum()) < 1e-9 and np.allclose(k1, -k1[::-1], atol=1e-9)
    assert abs(k2.sum()) < 1e-6 and np.allclose(k2, k2[::-1], atol=1e-6) and k2[len(k2) // 2] < 0


def test_spacing_must_divide_h():
    with pytest.raises(ValueError):
        ftrans.ft_kernel(ftrans.uniform_partition(5, 0.1), 0, 0.03)


def test_inverse_transform():
    p = ftrans.uniform_partition(9, math.pi / 4)
    x = _grid(p, math.pi / 64)
    np.testing.assert_allclose(ftrans.inverse_ft(np.full(9, 2.5), p, x), 2.5, rtol=1e-14)

    def sup_err(n):
        q = ftrans.uniform_partition(n, 2 * math.pi / (n - 1))
        xs = _grid(q, q.h / 8)
        c = ftrans.ft_components(xs, np.sin(xs), q, 0)[:, 0]
        inner = (xs > q.nodes[1]) & (xs < q.nodes[-2])
        return np.abs(ftrans.inverse_ft(c, q, xs) - np.sin(xs))[inner].max(), q.h

    e1, h1 = sup_err(9)
    e2, _ = sup_err(17)
    assert e2 < e1 and e1 <= 1.0 * h1  # Lipschitz constant 1


def test_neurons():
    W = np.zeros((3, 3))
    W[1, 1] = 1
    patch = np.arange(9.0).reshape(3, 3)
    assert ftrans.conv_neuron(patch, W, 0) == 4
    assert ftrans.ann_neuron([1, 2], [0.5, -1], 0.25, np.tanh) == np.tanh(-1.25)
    with pytest.raises(ValueError):
        ftrans.conv_neuron(patch, np.zeros((2, 2)), 0)
    with pytest.raises(ValueError):
        ftrans.ann_neuron([1, 2], [1], 0)


def test_separable_smoothing_keeps_constants():
    k = ftrans.ft_kernel(ftrans.uniform_partition(7, 0.2, "raised_cosine"), 0, 0.05)
    out = ftrans.conv_layer(np.full((20, 20), 1.7), ftrans.separable_kernel(k), 0)
    np.testing.assert_allclose(out, 1.7, rtol=1e-13)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 30))
def test_conv_shift_equivariance(seed):
    rng = np.random.default_rng(seed)
    img = rng.normal(size=(12, 12))
    W = rng.normal(size=(3, 3))
    a = ftrans.conv_layer(img, W, 0.1)
    b = ftrans.conv_layer(np.roll(img, 1, axis=1), W, 0.1)
    np.testing.assert_allclose(b[:, 1:], a[:, :-1], rtol=1e-12, atol=1e-12)


def test_csv_exports(tmp_path):
    p = ftrans.uniform_partition(5, 0.1)
    ks = [ftrans.ft_kernel(p, d, 0.05) for d in range(3)]
    ftrans.write_kernel_csv(tmp_path / "k.csv", ks)
    rows = (tmp_path / "k.csv").read_text().splitlines()
    assert rows[0] == "degree,offset,tap" and len(rows) == 1 + 3 * 5
    ftrans.write_components_csv(tmp_path / "c.csv", p, np.ones((5, 1)))
    assert (tmp_path / "c.csv").read_text().splitlines()[1] == "0,1.0,0.0,0.0"
