"""Controlled ODE blocks integrated by explicit Euler, and the residual
network they unroll into.

The state obeys dz/dt = f(A(t), z) with a piecewise-constant control, one
block (A_W, A_b) per Euler step, and f(A, z) = tanh(A_W z + A_b) (or the
linear map A_W z + A_b).  A readout u(x) = a . z_n + b is fitted to data by
gradient descent through the unrolled steps.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

NONLINEARITIES = {
    "tanh": (np.tanh, lambda y: 1 - y * y),
    "identity": (lambda x: x, lambda y: np.ones_like(y)),
}


@dataclass
class ControlledODE:
    W: np.ndarray  # (n, d, d) control weights per step
    c: np.ndarray  # (n, d) control biases per step
    horizon: float = 1.0
    readout_a: np.ndarray = None
    readout_b: float = 0.0
    nonlinearity: str = "tanh"

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        n, d, d2 = self.W.shape
        if n < 1 or d != d2 or self.c.shape != (n, d):
            raise ValueError("need n >= 1 blocks of shape (d, d) and (d,)")
        if self.readout_a is None:
            self.readout_a = np.zeros(d)
        self.readout_a = np.asarray(self.readout_a, dtype=float)
        if self.readout_a.shape != (d,):
            raise ValueError("readout dimension does not match the state")
        if self.nonlinearity not in NONLINEARITIES:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")

    @property
    def steps(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    @property
    def h(self) -> float:
        return self.horizon / self.steps

    @classmethod
    def random(cls, d, n, seed=0, horizon=1.0, scale=0.5, nonlinearity="tanh"):
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0, scale, (n, d, d)), rng.normal(0, scale, (n, d)), horizon,
                   rng.normal(0, scale, d), float(rng.normal(0, scale)), nonlinearity)

    def field(self, k, z):
        return NONLINEARITIES[self.nonlinearity][0](z @ self.W[k].T + self.c[k])

    def copy(self):
        return ControlledODE(self.W.copy(), self.c.copy(), self.horizon, self.readout_a.copy(),
                             self.readout_b, self.nonlinearity)

    def to_dict(self):
        return {
            "blocks": [{"W": self.W[k].tolist(), "b": self.c[k].tolist()} for k in range(self.steps)],
            "readout": {"a": self.readout_a.tolist(), "b": float(self.readout_b)},
            "horizon": self.horizon,
            "nonlinearity": self.nonlinearity,
        }


class DivergenceError(FloatingPointError):
    pass


def euler_integrate(model: ControlledODE, x):
    """States z_0 = x, z_{k+1} = z_k + h f(A_k, z_k); shape (n+1, ..., d).

    Raises DivergenceError if a state becomes non-finite.
    """
    z = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(z)):
        raise ValueError("initial state must be finite")
    traj = [z]
    for k in range(model.steps):
        with np.errstate(over="ignore", invalid="ignore"):  # checked just below
            z = z + model.h * model.field(k, z)
        if not np.all(np.isfinite(z)):
            raise DivergenceError(f"state became non-finite at step {k + 1}")
        traj.append(z)
    return np.stack(traj)


class ResidualNetwork:
    """The same blocks written as a layered residual network z <- z + h g(W z + b)."""

    def __init__(self, model: ControlledODE):
        act = NONLINEARITIES[model.nonlinearity][0]
        h = model.h
        self.layers = [(lambda z, W=model.W[k], b=model.c[k]: z + h * act(z @ W.T + b)) for k in range(model.steps)]

    def forward(self, x):
        z = np.asarray(x, dtype=float)
        out = [z]
        for layer in self.layers:
            z = layer(z)
            out.append(z)
        return np.stack(out)


def resnet_equivalence(model: ControlledODE, x) -> float:
    """Largest state-by-state difference between the Euler and residual passes."""
    return float(np.max(np.abs(euler_integrate(model, x) - ResidualNetwork(model).forward(x))))


def linear_test_error(n, x=1.0, horizon=1.0):
    """Euler on dz/dt = z over [0, T]: |z_n - x e^T|."""
    model = ControlledODE(np.ones((n, 1, 1)), np.zeros((n, 1)), horizon, nonlinearity="identity")
    return float(abs(euler_integrate(model, [x])[-1, 0] - x * math.exp(horizon)))


def euler_order(ns=(16, 32, 64, 128)):
    errs = [linear_test_error(n) for n in ns]
    return float(np.mean(np.log2(np.array(errs[:-1]) / np.array(errs[1:])))), errs


# ---------------------------------------------------------------------------
# fitting the control


def embed_inputs(x, d):
    """Scalar or short inputs padded with zeros to the state dimension."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] > d:
        raise ValueError("input longer than the state")
    return np.hstack([x, np.zeros((len(x), d - x.shape[1]))])


def predict(model: ControlledODE, x):
    z = euler_integrate(model, embed_inputs(x, model.dim))
    return z[-1] @ model.readout_a + model.readout_b


def loss_and_grad(model: ControlledODE, x, y):
    """Mean squared error of the readout and its exact gradient through the
    unrolled Euler steps (reverse accumulation)."""
    y = np.asarray(y, dtype=float).ravel()
    traj = euler_integrate(model, embed_inputs(x, model.dim))
    act, dact = NONLINEARITIES[model.nonlinearity]
    out = traj[-1] @ model.readout_a + model.readout_b
    r = out - y
    m = len(y)
    loss = float(np.mean(r * r))
    dout = 2 * r / m
    ga = traj[-1].T @ dout
    gb = float(dout.sum())
    lam = np.outer(dout, model.readout_a)  # dL/dz_n
    gW = np.zeros_like(model.W)
    gc = np.zeros_like(model.c)
    h = model.h
    for k in range(model.steps - 1, -1, -1):
        z = traj[k]
        s = act(z @ model.W[k].T + model.c[k])
        g = lam * h * dact(s)
        gW[k] = g.T @ z
        gc[k] = g.sum(0)
        lam = lam + g @ model.W[k]
    return loss, {"W": gW, "c": gc, "a": ga, "b": gb}


def _params(model):
    return np.concatenate([model.W.ravel(), model.c.ravel(), model.readout_a, [model.readout_b]])


def _set_params(model, theta):
    n, d, _ = model.W.shape
    k = 0
    model.W = theta[k:k + n * d * d].reshape(n, d, d)
    k += n * d * d
    model.c = theta[k:k + n * d].reshape(n, d)
    k += n * d
    model.readout_a = theta[k:k + d].copy()
    model.readout_b = float(theta[k + d])


def _flat(g):
    return np.concatenate([g["W"].ravel(), g["c"].ravel(), g["a"], [g["b"]]])


def gradient_check(model: ControlledODE, x, y, h=1e-6) -> float:
    """Max relative deviation of the analytic gradient from central differences."""
    _, g = loss_and_grad(model, x, y)
    g = _flat(g)
    theta = _params(model)
    work = model.copy()
    fd = np.zeros_like(theta)
    for k in range(len(theta)):
        for sgn in (1, -1):
            t = theta.copy()
            t[k] += sgn * h
            _set_params(work, t)
            fd[k] += sgn * loss_and_grad(work, x, y)[0] / (2 * h)
    return float(np.max(np.abs(g - fd)) / max(np.max(np.abs(fd)), 1e-12))


@dataclass
class FitResult:
    model: ControlledODE
    loss: list = field(default_factory=list)
    diverged: bool = False


def fit_control(x, y, template: ControlledODE, eta=0.05, epochs=5000, tol=0.0, blocks=True) -> FitResult:
    """Full-batch gradient descent on all blocks and the readout.

    With ``blocks=False`` only the readout (a, b) is updated.
    """
    model = template.copy()
    res = FitResult(model)
    theta = _params(model)
    n_blocks = model.W.size + model.c.size
    for _ in range(epochs):
        _set_params(model, theta)
        try:
            loss, g = loss_and_grad(model, x, y)
        except DivergenceError:
            res.diverged = True
            break
        res.loss.append(loss)
        if not math.isfinite(loss) or loss > 1e6:
            res.diverged = True
            break
        if loss < tol:
            break
        step = _flat(g)
        if not blocks:
            step[:n_blocks] = 0.0
        theta = theta - eta * step
    _set_params(model, theta)
    return res


def write_loss_csv(path, losses):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss"])
        for k, v in enumerate(losses):
            w.writerow([k, repr(float(v))])


def write_model_json(path, model: ControlledODE):
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")
