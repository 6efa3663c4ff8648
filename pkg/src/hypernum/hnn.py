"""Feed-forward networks over the reals, complex numbers and quaternions.

Every number-system element is stored by its real components, so a layer
with ``n_in`` inputs and ``n_out`` outputs over a system of dimension ``d``
holds ``W`` of shape (n_out, n_in, d) and ``b`` of shape (n_out, d).  The
product ``w * x`` is written as ``sum_c w_c B[c] @ x`` with the real basis
matrices ``B`` of left multiplication, which gives the forward pass, the
real-expanded network and the chain rule from one table.

Activations are split: the real function acts on every real component.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hquat import left_matrix, qconj, qmul

SYSTEMS = {"R": 1, "C": 2, "H": 4}


def _basis(system):
    d = SYSTEMS[system]
    if system == "H":
        return np.stack([left_matrix(e) for e in np.eye(4)])
    if system == "C":
        return np.array([[[1.0, 0.0], [0.0, 1.0]], [[0.0, -1.0], [1.0, 0.0]]])
    return np.ones((1, 1, 1))


BASIS = {s: _basis(s) for s in SYSTEMS}


def mult_matrix(system, a):
    """Real matrix of left multiplication by the element with components ``a``."""
    return np.tensordot(np.asarray(a, dtype=float), BASIS[system], axes=1)


# ---------------------------------------------------------------------------
# activations


def heaviside3(x):
    """Three-valued step: 1 for x > 0, 0 at 0, -1 for x < 0."""
    return np.sign(x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


ACTIVATIONS = {
    "identity": (lambda x: x, lambda x, y: np.ones_like(x)),
    "sigmoid": (_sigmoid, lambda x, y: y * (1 - y)),
    "tanh": (np.tanh, lambda x, y: 1 - y * y),
    "relu": (lambda x: np.maximum(x, 0.0), lambda x, y: (x > 0).astype(float)),
    "heaviside3": (heaviside3, None),
}


class NonDifferentiableError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data containers


@dataclass
class Dataset:
    """Inputs (n, n_in, d) and targets (n, n_out, d) as real components."""

    inputs: np.ndarray
    targets: np.ndarray
    name: str = ""
    meta: dict = field(default_factory=dict)  # e.g. hidden generating parameters

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.inputs.ndim == 2:
            self.inputs = self.inputs[..., None]
        if self.targets.ndim == 2:
            self.targets = self.targets[..., None]
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets differ in length")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset has non-finite entries")

    def __len__(self):
        return len(self.inputs)

    @property
    def dim(self) -> int:
        return self.inputs.shape[-1]


def embed(data: Dataset, system: str) -> Dataset:
    """Place real data in the scalar part of a higher number system."""
    d = SYSTEMS[system]
    if data.dim == d:
        return data
    if data.dim != 1:
        raise ValueError("only real data can be embedded")
    pad = lambda a: np.concatenate([a, np.zeros(a.shape[:-1] + (d - 1,))], -1)
    return Dataset(pad(data.inputs), pad(data.targets), data.name, data.meta)


@dataclass
class TrainLog:
    loss: list = field(default_factory=list)
    epochs_to_threshold: int | None = None
    diverged: bool = False

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss"])
            for k, v in enumerate(self.loss):
                w.writerow([k, repr(float(v))])

    def summary(self) -> dict:
        return {
            "epochs_to_threshold": self.epochs_to_threshold,
            "final_loss": float(self.loss[-1]) if self.loss else None,
            "epochs_run": len(self.loss),
            "diverged": self.diverged,
        }


# ---------------------------------------------------------------------------
# network


@dataclass
class Layer:
    W: np.ndarray  # (n_out, n_in, d)
    b: np.ndarray  # (n_out, d)
    activation: str = "identity"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class HyperNetwork:
    system: str
    layers: list
    seed: int | None = None

    def __post_init__(self):
        if self.system not in SYSTEMS:
            raise ValueError(f"unknown number system {self.system!r}")
        d = SYSTEMS[self.system]
        for k, L in enumerate(self.layers):
            if L.W.shape[-1] != d or L.b.shape != (L.W.shape[0], d):
                raise ValueError(f"layer {k} does not match number system {self.system}")
            if k and L.W.shape[1] != self.layers[k - 1].W.shape[0]:
                raise ValueError(f"layer {k} input size does not chain")
            if not (np.all(np.isfinite(L.W)) and np.all(np.isfinite(L.b))):
                raise ValueError(f"layer {k} has non-finite parameters")

    @classmethod
    def build(cls, system, sizes, activations, seed=0):
        """Random network; every real component ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))."""
        if isinstance(activations, str):
            activations = [activations] * (len(sizes) - 1)
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        d = SYSTEMS[system]
        rng = np.random.default_rng(seed)
        layers = []
        for n_in, n_out, act in zip(sizes[:-1], sizes[1:], activations):
            lim = 1.0 / math.sqrt(n_in)
            layers.append(Layer(rng.uniform(-lim, lim, (n_out, n_in, d)), rng.uniform(-lim, lim, (n_out, d)), act))
        return cls(system, layers, seed)

    @property
    def dim(self) -> int:
        return SYSTEMS[self.system]

    @property
    def sizes(self):
        return [self.layers[0].W.shape[1]] + [L.W.shape[0] for L in self.layers]

    @property
    def n_params(self) -> int:
        return sum(L.W.size + L.b.size for L in self.layers)

    def get_params(self):
        return np.concatenate([np.concatenate([L.W.ravel(), L.b.ravel()]) for L in self.layers])

    def set_params(self, theta):
        theta = np.asarray(theta, dtype=float)
        k = 0
        for L in self.layers:
            L.W = theta[k:k + L.W.size].reshape(L.W.shape)
            k += L.W.size
            L.b = theta[k:k + L.b.size].reshape(L.b.shape)
            k += L.b.size

    def copy(self):
        return HyperNetwork(self.system, [Layer(L.W.copy(), L.b.copy(), L.activation) for L in self.layers], self.seed)

    def expanded(self):
        """Equivalent real network: list of (matrix, bias, activation)."""
        B = BASIS[self.system]
        out = []
        for L in self.layers:
            n_out, n_in, d = L.W.shape
            M = np.einsum("oic,cde->odie", L.W, B).reshape(n_out * d, n_in * d)
            out.append((M, L.b.reshape(-1), L.activation))
        return out


def _as_batch(net, x):
    x = np.asarray(x, dtype=float)
    d = net.dim
    n_in = net.sizes[0]
    if d == 1 and x.shape[-2:] != (n_in, 1):
        x = x[..., None]  # plain real vectors or batches of them
    if x.shape[-2:] != (n_in, d):
        raise ValueError(f"input shape {x.shape} does not match ({n_in}, {d})")
    return x


def forward(net: HyperNetwork, x, return_cache=False):
    """Layer-by-layer a = g(b + W x); x has shape (n_in, d) or (batch, n_in, d)."""
    x = _as_batch(net, x)
    single = x.ndim == 2
    a = x[None] if single else x
    B = BASIS[net.system]
    cache = [a]
    for L in net.layers:
        z = np.einsum("oic,cde,nie->nod", L.W, B, a) + L.b
        g = ACTIVATIONS[L.activation][0]
        a = g(z)
        cache.append((z, a))
    out = a[0] if single else a
    return (out, cache) if return_cache else out


def forward_expanded(net: HyperNetwork, x):
    """Forward pass through the real expansion; same shapes as ``forward``."""
    x = _as_batch(net, x)
    lead = x.shape[:-2]
    a = x.reshape(lead + (-1,))
    for M, b, act in net.expanded():
        a = ACTIVATIONS[act][0](a @ M.T + b)
    return a.reshape(lead + (-1, net.dim))


def mse(out, targets) -> float:
    return float(np.mean((out - targets) ** 2))


def backprop_grad(net: HyperNetwork, batch: Dataset):
    """Gradient of the mean squared error over real components.

    Returns (loss, grads) with grads a list of (dW, db) per layer.
    """
    for L in net.layers:
        if ACTIVATIONS[L.activation][1] is None:
            raise NonDifferentiableError(f"activation {L.activation!r} has no derivative")
    out, cache = forward(net, batch.inputs, return_cache=True)
    B = BASIS[net.system]
    loss = mse(out, batch.targets)
    delta = 2.0 * (out - batch.targets) / out.size
    grads = []
    for k in range(len(net.layers) - 1, -1, -1):
        L = net.layers[k]
        z, a = cache[k + 1]
        a_prev = cache[k] if k == 0 else cache[k][1]
        delta = delta * ACTIVATIONS[L.activation][1](z, a)
        dW = np.einsum("nod,cde,nie->oic", delta, B, a_prev)
        db = delta.sum(0)
        grads.append((dW, db))
        delta = np.einsum("nod,oic,cde->nie", delta, L.W, B)
    return loss, grads[::-1]


def flat_grad(net, batch):
    loss, grads = backprop_grad(net, batch)
    return loss, np.concatenate([np.concatenate([gW.ravel(), gb.ravel()]) for gW, gb in grads])


def finite_difference_grad(net, batch, h=1e-6):
    theta = net.get_params()
    g = np.zeros_like(theta)
    work = net.copy()
    for k in range(len(theta)):
        tp, tm = theta.copy(), theta.copy()
        tp[k] += h
        tm[k] -= h
        work.set_params(tp)
        fp = mse(forward(work, batch.inputs), batch.targets)
        work.set_params(tm)
        fm = mse(forward(work, batch.inputs), batch.targets)
        g[k] = (fp - fm) / (2 * h)
    return g


def gradient_check(net, batch, h=1e-6) -> float:
    """Max relative deviation between backprop and central differences."""
    _, g = flat_grad(net, batch)
    fd = finite_difference_grad(net, batch, h)
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12))


def train(net: HyperNetwork, data: Dataset, eta: float, max_epochs: int, loss_threshold: float = 0.0,
          stop_at_threshold: bool = True, optimizer: str = "gd") -> TrainLog:
    """Full-batch training in place.

    ``optimizer="gd"`` is plain gradient descent; ``"adam"`` rescales the
    same full-batch gradient per parameter.  A loss above 1e6 or a
    non-finite loss stops training and sets ``diverged``.
    """
    log = TrainLog()
    theta = net.get_params()
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for epoch in range(max_epochs):
        net.set_params(theta)
        loss, g = flat_grad(net, data)
        log.loss.append(loss)
        if not math.isfinite(loss) or loss > 1e6:
            log.diverged = True
            break
        if loss < loss_threshold and log.epochs_to_threshold is None:
            log.epochs_to_threshold = epoch
            if stop_at_threshold:
                break
        if optimizer == "adam":
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            step = (m / (1 - 0.9 ** (epoch + 1))) / (np.sqrt(v / (1 - 0.999 ** (epoch + 1))) + 1e-8)
        elif optimizer == "gd":
            step = g
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        theta = theta - eta * step
    net.set_params(theta)
    return log


# ---------------------------------------------------------------------------
# perceptron


def perceptron_fit(inputs, targets, max_epochs=100, eta=1.0):
    """Error-driven perceptron on inputs extended with a leading 1.

    Returns (weights, converged); converged means an epoch with no mistakes.
    """
    X = np.asarray(inputs, dtype=float)
    f = np.asarray(targets, dtype=float).ravel()
    if not np.all(np.isin(f, (-1.0, 1.0))):
        raise ValueError("perceptron targets must be +-1")
    X = np.hstack([np.ones((len(X), 1)), X.reshape(len(X), -1)])
    W = np.zeros(X.shape[1])
    for _ in range(max_epochs):
        mistakes = 0
        for xi, fi in zip(X, f):
            y = heaviside3(W @ xi)
            if y != fi:
                W = W + eta * (fi - y) * xi
                mistakes += 1
        if mistakes == 0:
            return W, True
    return W, False


def separating_line_exists(inputs, targets) -> bool:
    """Exhaustive check whether some line strictly separates planar points.

    Every dichotomy a line can realize is realized by a line through two of
    the points, nudged by a small shift and rotation; all such candidates
    are enumerated, so a False answer is exact for points in general
    position (and for the 4-point truth tables).
    """
    P = np.asarray(inputs, dtype=float)
    f = np.asarray(targets, dtype=float).ravel()
    if P.shape[1] != 2:
        raise ValueError("points must be planar")
    eps = 1e-6 * (1 + np.abs(P).max())
    cands = []
    for i in range(len(P)):
        for j in range(len(P)):
            if i == j:
                continue
            d = P[j] - P[i]
            for rot in (-eps, 0.0, eps):
                c, s = math.cos(rot), math.sin(rot)
                dd = np.array([c * d[0] - s * d[1], s * d[0] + c * d[1]])
                nrm = np.array([-dd[1], dd[0]])
                for shift in (-eps, 0.0, eps):
                    off = -nrm @ P[i] + shift
                    cands.append(np.r_[off, nrm])
    X = np.hstack([np.ones((len(P), 1)), P])
    for w in cands:
        for sgn in (1, -1):
            if np.all(np.sign(sgn * X @ w) == f):
                return True
    return False


# ---------------------------------------------------------------------------
# datasets

_TRUTH_INPUTS = {
    "xor": np.array([[-1, -1], [-1, 1], [1, -1], [1, 1]], dtype=float),
    "parity3": np.array([[a, b, c] for a in (-1, 1) for b in (-1, 1) for c in (-1, 1)], dtype=float),
}


def make_dataset(kind: str, seed: int = 0, size: int = 64) -> Dataset:
    """Benchmark data.  xor / parity3 are +-1 truth tables; affine2d is
    complex (w z + b for a hidden (w, b)); rot3d maps pure quaternions v to
    q v conj(q) for a hidden unit q."""
    rng = np.random.default_rng(seed)
    if kind == "xor":
        X = _TRUTH_INPUTS["xor"]
        return Dataset(X, -X[:, :1] * X[:, 1:], "xor")
    if kind == "parity3":
        X = _TRUTH_INPUTS["parity3"]
        return Dataset(X, np.prod(X, axis=1, keepdims=True), "parity3")
    if kind == "affine2d":
        w, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        z = rng.uniform(-1, 1, size) + 1j * rng.uniform(-1, 1, size)
        t = w * z + b
        return Dataset(np.stack([z.real, z.imag], -1)[:, None], np.stack([t.real, t.imag], -1)[:, None],
                       "affine2d", {"w": w, "b": b})
    if kind == "rot3d":
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        v = np.zeros((size, 4))
        v[:, 1:] = rng.uniform(-1, 1, (size, 3))
        t = qmul(qmul(q, v), qconj(q))
        return Dataset(v[:, None], t[:, None], "rot3d", {"q": q})
    raise ValueError(f"unknown dataset kind {kind!r}")


def matched_real_width(n_in, hidden_h, n_out=1):
    """Hidden width of a real n_in-h-n_out net whose parameter count is
    closest to the quaternion n_in-hidden_h-n_out net."""
    target = 4 * (hidden_h * (n_in + 1) + n_out * (hidden_h + 1))
    count = lambda h: h * (n_in + 1) + n_out * (h + 1)
    return min(range(1, 10 * target), key=lambda h: abs(count(h) - target)), target, count


# ---------------------------------------------------------------------------
# approximation experiments


def sup_error_grid(n=512):
    return np.linspace(0.0, 1.0, n)


def cybenko_sweep(target, widths, seed=0, epochs=3000, eta=0.01, n_train=128, optimizer="adam",
                  exact_readout=True):
    """Sup-norm error of 1-hidden-layer sigmoid nets of each width on [0, 1].

    After gradient training, ``exact_readout`` re-solves the linear output
    layer by least squares on the training points (the exact minimizer of
    the loss for the trained hidden features).
    Returns a list of (width, sup_error, final_training_loss).
    """
    widths = list(widths)
    if any(b <= a for a, b in zip(widths, widths[1:])):
        raise ValueError("widths must be increasing")
    xs = np.linspace(0.0, 1.0, n_train)
    ys = np.asarray(target(xs), dtype=float)
    data = Dataset(xs[:, None], ys[:, None])
    grid = sup_error_grid()
    rows = []
    for w in widths:
        net = HyperNetwork.build("R", [1, w, 1], ["sigmoid", "identity"], seed=seed)
        train(net, data, eta, epochs, optimizer=optimizer)
        if exact_readout:
            hidden = forward(HyperNetwork("R", net.layers[:1]), xs[:, None])[:, :, 0]
            A = np.hstack([hidden, np.ones((n_train, 1))])
            coef = np.linalg.lstsq(A, ys, rcond=None)[0]
            net.layers[1].W = coef[:-1].reshape(1, w, 1)
            net.layers[1].b = coef[-1:].reshape(1, 1)
        loss = mse(forward(net, xs[:, None])[:, 0, 0], ys)
        pred = forward(net, grid[:, None])[:, 0, 0]
        rows.append((w, float(np.abs(pred - target(grid)).max()), loss))
    return rows


def make_blobs(seed=0, n=200):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n // 2, 2)) * 0.3 + [-1, -1]
    b = rng.normal(size=(n - n // 2, 2)) * 0.3 + [1, 1]
    return Dataset(np.vstack([a, b]), np.r_[-np.ones(len(a)), np.ones(len(b))][:, None], "blobs")


def make_circles(seed=0, n=200, r_inner=0.5, r_outer=1.0, noise=0.05):
    rng = np.random.default_rng(seed)
    k = n // 2
    ang = rng.uniform(0, 2 * math.pi, n)
    r = np.r_[np.full(k, r_inner), np.full(n - k, r_outer)] + noise * rng.normal(size=n)
    X = np.stack([r * np.cos(ang), r * np.sin(ang)], -1)
    return Dataset(X, np.r_[-np.ones(k), np.ones(n - k)][:, None], "circles")


def accuracy(net, data: Dataset) -> float:
    out = forward(net, data.inputs)[..., 0, 0]
    return float(np.mean(np.sign(out) == data.targets[..., 0, 0]))


def narrow_deep_separation(data: Dataset, depth: int, seed=0, epochs=3000, eta=0.01, optimizer="adam"):
    """Train a width-2 tanh network with ``depth`` hidden layers; return accuracy."""
    net = HyperNetwork.build("R", [2] + [2] * depth + [1], "tanh", seed=seed)
    train(net, data, eta, epochs, optimizer=optimizer)
    return accuracy(net, data), net


def export_summary(path, runs: dict):
    Path(path).write_text(json.dumps(runs, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# rotation by a quaternion sandwich


def rotate(q, v):
    """q v conj(q) / |q|^2 for pure quaternions v (..., 4)."""
    q = np.asarray(q, dtype=float)
    return qmul(qmul(q, v), qconj(q)) / float(q @ q)


def fit_rotation(data: Dataset, eta=0.5, epochs=500, seed=0):
    """Fit the single-parameter model v -> q v conj(q) / |q|^2.

    The loss is smooth in the four components of q, so its gradient is taken
    by central differences.  Returns (unit q, loss history).
    """
    v, t = data.inputs[:, 0], data.targets[:, 0]
    q = np.random.default_rng(seed).normal(size=4)
    loss_of = lambda q: float(np.mean((rotate(q, v) - t) ** 2))
    hist = []
    for _ in range(epochs):
        hist.append(loss_of(q))
        g = np.array([(loss_of(q + e * 1e-6) - loss_of(q - e * 1e-6)) / 2e-6 for e in np.eye(4)])
        q = q - eta * g
        q /= np.linalg.norm(q)
    hist.append(loss_of(q))
    return q, hist
