"""Quaternion and complex-pair algebra.

Components are always stored in the order (1, i, j, k).  The array-level
functions (``qmul``, ``qconj``, ...) broadcast over leading axes of
``(..., 4)`` float arrays; :class:`Quaternion` is a thin value type on top.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


def qmul(a, b):
    """Hamilton product of quaternion arrays of shape (..., 4)."""
    a = np.asarray(a)
    b = np.asarray(b)
    a0, a1, a2, a3 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    b0, b1, b2, b3 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def qconj(a):
    a = np.asarray(a)
    return a * np.array([1, -1, -1, -1], dtype=a.dtype if a.dtype.kind != "b" else float)


def qnorm2(a):
    a = np.asarray(a)
    return np.sum(a * a, axis=-1)


def qinv(a):
    return qconj(a) / qnorm2(a)[..., None]


def left_matrix(a):
    """Real 4x4 matrix L with L @ x == qmul(a, x)."""
    a0, a1, a2, a3 = np.asarray(a, dtype=float)
    return np.array(
        [
            [a0, -a1, -a2, -a3],
            [a1, a0, -a3, a2],
            [a2, a3, a0, -a1],
            [a3, -a2, a1, a0],
        ]
    )


def to_pair(a):
    """(..., 4) real array -> (z1, z2) complex arrays."""
    a = np.asarray(a, dtype=float)
    return a[..., 0] + 1j * a[..., 1], a[..., 2] + 1j * a[..., 3]


def from_pair_arrays(z1, z2):
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def pair_mul(p, q):
    """Product of complex pairs: (z1 + z2 j)(w1 + w2 j), using a j = j conj(a)."""
    z1, z2 = p
    w1, w2 = q
    return z1 * w1 - z2 * np.conj(w2), z1 * w2 + z2 * np.conj(w1)


class ComplexPair(NamedTuple):
    z1: complex
    z2: complex


@dataclass(frozen=True)
class Quaternion:
    a0: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        a = np.asarray(arr).tolist()
        return cls(*a)

    def to_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2, self.a3], dtype=float)

    def __iter__(self):
        return iter((self.a0, self.a1, self.a2, self.a3))

    def __add__(self, other):
        other = _coerce(other)
        return Quaternion(*(x + y for x, y in zip(self, other)))

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Quaternion(*(x - y for x, y in zip(self, other)))

    def __rsub__(self, other):
        return _coerce(other) - self

    def __neg__(self):
        return Quaternion(-self.a0, -self.a1, -self.a2, -self.a3)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion(*(x * other for x in self))
        return quat_mul(self, _coerce(other))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Quaternion(*(x * other for x in self))
        return quat_mul(_coerce(other), self)

    def __truediv__(self, s):
        return Quaternion(*(x / s for x in self))

    def conj(self) -> "Quaternion":
        return Quaternion(self.a0, -self.a1, -self.a2, -self.a3)

    def norm2(self):
        return self.a0 ** 2 + self.a1 ** 2 + self.a2 ** 2 + self.a3 ** 2

    def inverse(self) -> "Quaternion":
        n = self.norm2()
        if n == 0:
            raise ZeroDivisionError("zero quaternion has no inverse")
        return self.conj() / n

    def __abs__(self):
        return self.norm2() ** 0.5


def _coerce(x) -> Quaternion:
    if isinstance(x, Quaternion):
        return x
    if isinstance(x, (int, float)):
        return Quaternion(x)
    return Quaternion.from_array(x)


ONE = Quaternion(1)
I = Quaternion(0, 1)
J = Quaternion(0, 0, 1)
K = Quaternion(0, 0, 0, 1)


def quat_mul(a: Quaternion, b: Quaternion) -> Quaternion:
    # written out on the tuple so integer inputs stay integer
    a0, a1, a2, a3 = a
    b0, b1, b2, b3 = b
    return Quaternion(
        a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
        a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
        a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
        a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
    )


def quat_conj_norm(a: Quaternion) -> tuple[Quaternion, float]:
    """Return the conjugate and the squared norm of ``a``."""
    return a.conj(), a.norm2()


def complex_pair(a: Quaternion) -> ComplexPair:
    return ComplexPair(complex(a.a0, a.a1), complex(a.a2, a.a3))


def from_pair(p: ComplexPair) -> Quaternion:
    z1, z2 = complex(p.z1), complex(p.z2)
    return Quaternion(z1.real, z1.imag, z2.real, z2.imag)
