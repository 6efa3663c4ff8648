"""Quadrature discretization of the unit sphere S^3 in R^4.

Nodes sit at the midpoints of a tensor grid in hyperspherical angles
(psi, theta, phi); each node carries the outward normal (the node itself)
and the 3-D surface measure of its cell.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SPHERE_AREA = 2.0 * math.pi ** 2


@dataclass(frozen=True)
class SurfaceMesh:
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    refinement: tuple[int, int, int]
    # node angles, kept for picking well-conditioned probe nodes
    angles: np.ndarray = field(repr=False)
    # (i_psi, i_theta, i_phi) of every node, and the inverse lookup
    grid_index: np.ndarray = field(repr=False)
    slot: np.ndarray = field(repr=False)
    # lazily filled quadrature data (alpha, local corrections)
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __len__(self):
        return len(self.weights)

    @property
    def area(self) -> float:
        return float(np.sum(self.weights))

    @property
    def max_cell_diameter(self) -> float:
        n_psi, n_theta, n_phi = self.refinement
        # largest cell sits on the equator of every angle
        return math.sqrt((math.pi / n_psi) ** 2 + (math.pi / n_theta) ** 2 + (2 * math.pi / n_phi) ** 2)

    def index_of(self, i_psi: int, i_theta: int, i_phi: int) -> int:
        return int(self.slot[i_psi, i_theta, i_phi])

    def permuted(self, perm) -> "SurfaceMesh":
        """Same quadrature with nodes relabelled: new node k is old node perm[k]."""
        perm = np.asarray(perm)
        slot = np.empty_like(self.slot)
        gi = self.grid_index[perm]
        slot[gi[:, 0], gi[:, 1], gi[:, 2]] = np.arange(len(perm))
        return SurfaceMesh(
            nodes=self.nodes[perm],
            normals=self.normals[perm],
            weights=self.weights[perm],
            refinement=self.refinement,
            angles=self.angles[perm],
            grid_index=gi,
            slot=slot,
        )


@dataclass
class BoundaryField:
    """Quaternion values (N, 4) on mesh nodes with a claimed Holder exponent."""

    values: np.ndarray
    holder_exponent: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[1] != 4:
            raise ValueError("boundary field values must have shape (N, 4)")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary field has non-finite values")
        if not 0 < self.holder_exponent <= 1:
            raise ValueError("holder exponent must lie in (0, 1]")

    @classmethod
    def from_function(cls, mesh: SurfaceMesh, fn, holder_exponent=1.0):
        return cls(np.asarray(fn(mesh.nodes), dtype=float), holder_exponent)


def hyperspherical_to_cartesian(psi, theta, phi):
    s = np.sin(psi)
    return np.stack(
        [
            np.cos(psi),
            s * np.cos(theta),
            s * np.sin(theta) * np.cos(phi),
            s * np.sin(theta) * np.sin(phi),
        ],
        axis=-1,
    )


def build_sphere_mesh(n_psi: int, n_theta: int, n_phi: int) -> SurfaceMesh:
    if min(n_psi, n_theta, n_phi) < 4:
        raise ValueError(f"all grid counts must be >= 4, got {(n_psi, n_theta, n_phi)}")
    d_psi, d_theta, d_phi = math.pi / n_psi, math.pi / n_theta, 2 * math.pi / n_phi
    psi = (np.arange(n_psi) + 0.5) * d_psi
    theta = (np.arange(n_theta) + 0.5) * d_theta
    phi = (np.arange(n_phi) + 0.5) * d_phi
    P, T, F = np.meshgrid(psi, theta, phi, indexing="ij")
    P, T, F = P.ravel(), T.ravel(), F.ravel()
    nodes = hyperspherical_to_cartesian(P, T, F)
    # renormalize so |x| = 1 holds to rounding
    nodes /= np.linalg.norm(nodes, axis=1)[:, None]
    weights = np.sin(P) ** 2 * np.sin(T) * d_psi * d_theta * d_phi
    gi = np.stack(np.meshgrid(np.arange(n_psi), np.arange(n_theta), np.arange(n_phi), indexing="ij"), -1)
    return SurfaceMesh(
        nodes=nodes,
        normals=nodes.copy(),
        weights=weights,
        refinement=(n_psi, n_theta, n_phi),
        angles=np.stack([P, T, F], axis=1),
        grid_index=gi.reshape(-1, 3),
        slot=np.arange(n_psi * n_theta * n_phi).reshape(n_psi, n_theta, n_phi),
    )


def equatorial_nodes(mesh: SurfaceMesh, count: int, seed: int = 0) -> np.ndarray:
    """Pick ``count`` node indices away from the coordinate poles.

    Cells near psi = 0, pi or theta = 0, pi are strongly anisotropic, which
    spoils cell-omission principal values; probes use the central band.
    """
    P, T = mesh.angles[:, 0], mesh.angles[:, 1]
    band = np.flatnonzero((np.abs(P - math.pi / 2) < math.pi / 8) & (np.abs(T - math.pi / 2) < math.pi / 8))
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(band, size=min(count, len(band)), replace=False))


def nearest_node(mesh: SurfaceMesh, point) -> int:
    """Index of the node closest to the direction of ``point``."""
    p = np.asarray(point, dtype=float)
    return int(np.argmax(mesh.nodes @ (p / np.linalg.norm(p))))


def antipodal_node(mesh: SurfaceMesh, t: int) -> int:
    """The node at -x_t; the angle grid is symmetric under x -> -x."""
    n_psi, n_theta, n_phi = mesh.refinement
    if n_phi % 2:
        raise ValueError("antipodal nodes need an even phi count")
    i, j, k = mesh.grid_index[t]
    return mesh.index_of(n_psi - 1 - i, n_theta - 1 - j, (k + n_phi // 2) % n_phi)


@dataclass(frozen=True)
class ADReport:
    radii: np.ndarray
    ratios: np.ndarray  # (n_centers, n_radii)

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min())

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())


def ad_regularity_probe(mesh: SurfaceMesh, radii, n_centers: int = 32, seed: int = 0) -> ADReport:
    """Measure H^3(Gamma ∩ B(x, r)) / r^3 over sampled centers x."""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0:
        raise ValueError("radius list is empty")
    if np.any(radii <= 0) or np.any(radii > 2.0):
        raise ValueError("radii must lie in (0, 2]")
    rng = np.random.default_rng(seed)
    centers = rng.choice(len(mesh), size=min(n_centers, len(mesh)), replace=False)
    ratios = np.empty((len(centers), len(radii)))
    for a, c in enumerate(centers):
        dist = np.linalg.norm(mesh.nodes - mesh.nodes[c], axis=1)
        for b, r in enumerate(radii):
            # tolerance so r = diam captures the antipode
            ratios[a, b] = mesh.weights[dist <= r + 1e-12].sum() / r ** 3
    return ADReport(radii=radii, ratios=ratios)


def holder_modulus(mesh: SurfaceMesh, f: BoundaryField, deltas, max_pairs: int = 400_000, seed: int = 0):
    """Empirical modulus of continuity w_f(delta) over sampled node pairs.

    Pairs are drawn once and reused for every delta, so the result is
    monotone in delta.
    """
    deltas = np.asarray(deltas, dtype=float)
    if np.any(deltas <= 0):
        raise ValueError("deltas must be positive")
    n = len(mesh)
    if n * (n - 1) // 2 <= max_pairs:
        a, b = np.triu_indices(n, k=1)
    else:
        rng = np.random.default_rng(seed)
        a = rng.integers(0, n, size=max_pairs)
        b = rng.integers(0, n, size=max_pairs)
        # grid neighbours along each angle, so small deltas see pairs too
        _, n_theta, n_phi = mesh.refinement
        idx = np.arange(n)
        near = [(idx[:-s], idx[s:]) for s in (1, n_phi, n_theta * n_phi) if s < n]
        a = np.concatenate([a] + [p for p, _ in near])
        b = np.concatenate([b] + [q for _, q in near])
    dist = np.linalg.norm(mesh.nodes[a] - mesh.nodes[b], axis=1)
    diff = np.linalg.norm(f.values[a] - f.values[b], axis=1)
    out = []
    for d in deltas:
        mask = dist <= d
        out.append((float(d), float(diff[mask].max()) if mask.any() else 0.0))
    return out


def holder_ratio_bound(mesh: SurfaceMesh, f: BoundaryField, deltas, **kw) -> float:
    """sup over sampled deltas of w_f(delta) / delta^nu."""
    return max(w / d ** f.holder_exponent for d, w in holder_modulus(mesh, f, deltas, **kw))


def export_mesh_csv(mesh: SurfaceMesh, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x0", "x1", "x2", "x3", "n0", "n1", "n2", "n3", "weight"])
        for x, nrm, wt in zip(mesh.nodes, mesh.normals, mesh.weights):
            w.writerow([repr(float(v)) for v in (*x, *nrm, wt)])
