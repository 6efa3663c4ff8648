"""F-transform components of degree 0..2 and their convolution kernels.

A uniform fuzzy partition of basic functions A_k (triangular or raised
cosine) covers an interval.  The degree-m component at node x_k is the
A_k-weighted least-squares polynomial of degree m in (x - x_k); its
coefficients are linear in the samples, so each one is a fixed tap
sequence applied by correlation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

SHAPES = ("triangular", "raised_cosine")


@dataclass(frozen=True)
class FuzzyPartition:
    nodes: np.ndarray
    h: float
    shape: str = "triangular"

    def __len__(self):
        return len(self.nodes)

    def basis(self, x):
        """A_k(x) for every node; shape (n_nodes, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        u = (x[None, :] - self.nodes[:, None]) / self.h
        inside = np.abs(u) <= 1
        if self.shape == "triangular":
            val = 1 - np.abs(u)
        else:
            val = 0.5 * (1 + np.cos(math.pi * u))
        return np.where(inside, val, 0.0)

    @property
    def interval(self):
        return float(self.nodes[0]), float(self.nodes[-1])


def uniform_partition(n: int, h: float, shape: str = "triangular", x0: float = 0.0) -> FuzzyPartition:
    if n < 3:
        raise ValueError("a partition needs n >= 3 nodes")
    if not h > 0:
        raise ValueError("bandwidth h must be positive")
    if shape not in SHAPES:
        raise ValueError(f"unknown shape {shape!r}")
    return FuzzyPartition(x0 + h * np.arange(n), float(h), shape)


def _local_fit_matrix(offsets, weights, degree):
    """Rows of the weighted least-squares solution operator: coef = P @ samples."""
    V = np.vander(offsets, degree + 1, increasing=True)
    G = V.T @ (weights[:, None] * V)
    if np.linalg.matrix_rank(G) < degree + 1:
        raise np.linalg.LinAlgError("too few samples under the basic function")
    return np.linalg.solve(G, V.T * weights)


def ft_components(x, f, p: FuzzyPartition, degree: int = 0):
    """Coefficients (n_nodes, degree+1): c0 value, c1 slope, c2 curvature term.

    c2 is the coefficient of (x - x_k)^2, so f = x^2 gives c2 = 1.
    """
    if degree not in (0, 1, 2):
        raise ValueError("degree must be 0, 1 or 2")
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    A = p.basis(x)
    out = np.zeros((len(p), degree + 1))
    for k in range(len(p)):
        sel = A[k] > 0
        P = _local_fit_matrix(x[sel] - p.nodes[k], A[k, sel], degree)
        out[k] = P @ f[sel]
    return out


@dataclass(frozen=True)
class FTKernel:
    degree: int
    taps: np.ndarray  # correlation taps over offsets -m..m samples
    h: float
    spacing: float

    @property
    def radius(self) -> int:
        return len(self.taps) // 2

    def coefficient(self):
        """Which polynomial coefficient the taps produce (0, 1 or 2)."""
        return self.degree


def ft_kernel(p: FuzzyPartition, degree: int, spacing: float) -> FTKernel:
    """Taps of the linear functional giving the degree-``degree``
    coefficient at an interior node from samples at ``spacing``.

    Only the highest coefficient of the degree-m fit is returned, which is
    what distinguishes the smoothing (0), slope (1) and curvature (2)
    kernels.
    """
    if degree not in (0, 1, 2):
        raise ValueError("degree must be 0, 1 or 2")
    m = p.h / spacing
    if abs(m - round(m)) > 1e-9 or round(m) < 1:
        raise ValueError("spacing must divide h")
    m = int(round(m))
    offsets = spacing * np.arange(-m, m + 1)
    w = p.basis(p.nodes[len(p) // 2] + offsets)[len(p) // 2]
    P = _local_fit_matrix(offsets[1:-1], w[1:-1], degree)  # end taps have zero weight
    taps = np.zeros(2 * m + 1)
    taps[1:-1] = P[degree]
    return FTKernel(degree, taps, p.h, spacing)


def apply_kernel(kernel: FTKernel, samples, centers):
    """Correlate taps with samples at the given center indices."""
    s = np.asarray(samples, dtype=float)
    r = kernel.radius
    idx = np.asarray(centers)[:, None] + np.arange(-r, r + 1)[None, :]
    return s[idx] @ kernel.taps


def inverse_ft(c0, p: FuzzyPartition, x):
    """Degree-0 reconstruction sum_k c0_k A_k(x)."""
    return np.asarray(c0, dtype=float).ravel() @ p.basis(x)


# ---------------------------------------------------------------------------
# neurons


def ann_neuron(x, w, b, g=lambda t: t):
    """a = g(b + w . x)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if x.shape != w.shape:
        raise ValueError(f"shape mismatch {x.shape} vs {w.shape}")
    return g(b + float(w @ x))


def conv_neuron(patch, W, b, g=lambda t: t):
    """a = g(b + sum_mn W[m, n] x[i+m, j+n]) over one patch."""
    patch = np.asarray(patch, dtype=float)
    W = np.asarray(W, dtype=float)
    if patch.shape != W.shape:
        raise ValueError(f"shape mismatch {patch.shape} vs {W.shape}")
    return g(b + float(np.sum(W * patch)))


def conv_layer(image, W, b, g=lambda t: t):
    """conv_neuron at every valid position; output shrinks by the kernel size - 1."""
    image = np.asarray(image, dtype=float)
    W = np.asarray(W, dtype=float)
    view = np.lib.stride_tricks.sliding_window_view(image, W.shape)
    return g(b + np.einsum("ijmn,mn->ij", view, W))


def separable_kernel(k1: FTKernel, k2: FTKernel | None = None):
    k2 = k1 if k2 is None else k2
    return np.outer(k1.taps, k2.taps)


# ---------------------------------------------------------------------------
# exports


def write_kernel_csv(path, kernels):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["degree", "offset", "tap"])
        for k in kernels:
            r = k.radius
            for j, t in enumerate(k.taps):
                w.writerow([k.degree, j - r, repr(float(t))])


def write_components_csv(path, p: FuzzyPartition, coef):
    coef = np.asarray(coef, dtype=float)
    full = np.zeros((len(p), 3))
    full[:, : coef.shape[1]] = coef
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "c0", "c1", "c2"])
        for k in range(len(p)):
            w.writerow([k] + [repr(float(v)) for v in full[k]])
