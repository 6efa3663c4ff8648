import math

import numpy as np
import pytest

from hypernum.surface import (SPHERE_AREA, BoundaryField, ad_regularity_probe, antipodal_node, build_sphere_mesh,
                              equatorial_nodes, export_mesh_csv, holder_modulus, holder_ratio_bound, nearest_node)


def test_area_matches_closed_form():
    mesh = build_sphere_mesh(24, 24, 48)
    assert abs(mesh.area - 2 * math.pi ** 2) / (2 * math.pi ** 2) < 1e-3


def test_area_error_shrinks_under_doubling():
    err = [abs(build_sphere_mesh(n, n, 2 * n).area - SPHERE_AREA) for n in (6, 12, 24)]
    assert err[1] <= err[0] / 2 and err[2] <= err[1] / 2


def test_nodes_on_unit_sphere(mesh12):
    np.testing.assert_allclose(np.linalg.norm(mesh12.nodes, axis=1), 1.0, atol=1e-15)
    np.testing.assert_array_equal(mesh12.normals, mesh12.nodes)
    assert np.all(mesh12.weights > 0)


@pytest.mark.parametrize("counts", [(3, 8, 8), (8, 2, 8), (8, 8, 0)])
def test_rejects_small_counts(counts):
    with pytest.raises(ValueError):
        build_sphere_mesh(*counts)


def test_ad_ratio_whole_sphere(mesh12):
    rep = ad_regularity_probe(mesh12, [2.0])
    np.testing.assert_allclose(rep.ratios, mesh12.area / 8, rtol=1e-12)


def test_ad_ratio_small_radius_flat_limit():
    mesh = build_sphere_mesh(64, 64, 128)
    rep = ad_regularity_probe(mesh, [0.3], n_centers=8)
    # cap area is slightly below the flat ball 4/3 pi r^3; a cell sum is a
    # rough measure, so allow a few percent
    assert abs(np.median(rep.ratios) / (4 * math.pi / 3) - 1) < 0.05


def test_ad_ratio_bracket():
    mesh = build_sphere_mesh(16, 16, 32)
    rep = ad_regularity_probe(mesh, [0.5, 1.0, 2.0])
    assert 1 <= rep.min_ratio and rep.max_ratio <= 8


def test_ad_probe_rejects_empty(mesh8):
    with pytest.raises(ValueError):
        ad_regularity_probe(mesh8, [])


def test_holder_constant_and_lipschitz(mesh8):
    const = BoundaryField(np.tile([1.0, 2, 3, 4], (len(mesh8), 1)))
    assert all(w == 0 for _, w in holder_modulus(mesh8, const, [0.1, 0.5, 2.0]))
    coord = BoundaryField.from_function(mesh8, lambda x: np.stack([x[:, 0]] + [0 * x[:, 0]] * 3, 1))
    for d, w in holder_modulus(mesh8, coord, [0.1, 0.3, 1.0, 2.0]):
        assert w <= d
    assert holder_ratio_bound(mesh8, coord, [0.1, 0.3, 1.0]) <= 1.0


def test_boundary_field_validation():
    with pytest.raises(ValueError):
        BoundaryField(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        BoundaryField(np.full((3, 4), np.nan))
    with pytest.raises(ValueError):
        BoundaryField(np.zeros((3, 4)), holder_exponent=1.5)


def test_antipodal_and_nearest(mesh12):
    t = nearest_node(mesh12, (0, 0, 1, 0))
    a = antipodal_node(mesh12, t)
    np.testing.assert_allclose(mesh12.nodes[a], -mesh12.nodes[t], atol=1e-15)
    assert nearest_node(mesh12, -mesh12.nodes[t]) == a
    with pytest.raises(ValueError):
        antipodal_node(build_sphere_mesh(8, 8, 9), 0)


def test_equatorial_nodes_stay_in_band(mesh12):
    nodes = equatorial_nodes(mesh12, 20, seed=3)
    assert len(set(nodes.tolist())) == 20
    ang = mesh12.angles[nodes]
    assert np.all(np.abs(ang[:, :2] - math.pi / 2) < math.pi / 8)


def test_permuted_mesh_keeps_grid_lookup(mesh8):
    perm = np.random.default_rng(0).permutation(len(mesh8))
    m = mesh8.permuted(perm)
    for k in (0, 17, len(m) - 1):
        assert m.index_of(*m.grid_index[k]) == k
    assert math.isclose(m.area, mesh8.area, rel_tol=1e-12)


def test_export_csv(tmp_path, mesh8):
    path = tmp_path / "mesh.csv"
    export_mesh_csv(mesh8, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "x0,x1,x2,x3,n0,n1,n2,n3,weight"
    assert len(lines) == len(mesh8) + 1
    assert all(len(l.split(",")) == 9 for l in lines)
