"""Coefficients, forcing terms and manufactured solutions for the benchmarks.

All callables are vectorised over numpy arrays.  Layer terms such as
``exp(-x/eps)`` underflow to exactly zero for tiny ``eps``; no intermediate
overflows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .mesh import LayerCase

Fn1 = Callable[[np.ndarray], np.ndarray]
Fn2 = Callable[[np.ndarray, np.ndarray], np.ndarray]

_SAMPLE = np.linspace(0.0, 1.0, 1001)


@dataclass(frozen=True)
class Problem1D:
    """``-eps u'' - c(x) u' + r(x) u = f`` on (0, 1), ``u(0) = u(1) = 0``."""

    c: Fn1
    r: Fn1
    f: Fn1
    c_lower: float

    def __post_init__(self):
        self.check_coefficients(_SAMPLE)

    def check_coefficients(self, x: np.ndarray) -> None:
        if self.c_lower <= 0:
            raise ValueError("c_lower must be positive")
        if np.any(self.c(x) < self.c_lower):
            raise ValueError("c(x) drops below c_lower")
        if np.any(self.r(x) < 0):
            raise ValueError("r(x) must be non-negative")


@dataclass(frozen=True)
class Problem2D:
    """``-eps Lap(u) - c1 u_x - c2 u_y + r u = f`` on the unit square."""

    c1: Fn2
    c2: Fn2
    r: Fn2
    f: Fn2
    c1_lower: float
    c2_lower: float | None
    layer_case: LayerCase

    def __post_init__(self):
        X, Y = np.meshgrid(_SAMPLE[::20], _SAMPLE[::20])
        self.check_coefficients(X, Y)

    def check_coefficients(self, X: np.ndarray, Y: np.ndarray) -> None:
        c1 = np.broadcast_to(self.c1(X, Y), X.shape)
        c2 = np.broadcast_to(self.c2(X, Y), X.shape)
        if np.any(c1 <= 0):
            raise ValueError("c1 must be strictly positive")
        if np.any(self.r(X, Y) < 0):
            raise ValueError("r must be non-negative")
        if self.layer_case is LayerCase.PARABOLIC_EXPONENTIAL:
            if np.any(c2 != 0):
                raise ValueError("parabolic/exponential case requires c2 == 0")
        elif np.any(c2 <= 0):
            raise ValueError("two exponential layers require c2 > 0")


@dataclass(frozen=True)
class ManufacturedCase:
    problem: Problem2D
    u_exact: Fn2
    eps: float


def _const(value: float):
    return lambda *xs: np.full(np.shape(xs[0]), value, dtype=float)


def example_1d(eps: float, c_lower: float = 0.99) -> Problem1D:
    """``-eps u'' - (2 + sin 5x) u' + u = 4 exp(-x)``.

    ``inf c = 1``; the default ``c_lower`` of 0.99 reproduces the reference
    error tables.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return Problem1D(
        c=lambda x: 2.0 + np.sin(5.0 * x),
        r=_const(1.0),
        f=lambda x: 4.0 * np.exp(-x),
        c_lower=c_lower,
    )


def _parabolic_x(x, eps):
    """Factor ``cos(pi x/2) - (e^{-x/eps} - e^{-1/eps}) / (1 - e^{-1/eps})``."""
    e1 = np.exp(-1.0 / eps)
    return np.cos(0.5 * np.pi * x) - (np.exp(-x / eps) - e1) / (1.0 - e1)


def _parabolic_y(y, eps):
    s = np.sqrt(eps)
    return (1.0 - np.exp(-y / s)) / (1.0 - np.exp(-1.0 / s)) - y ** 2.5


def parabolic_case(eps: float, c1_lower: float = 0.99) -> ManufacturedCase:
    """``-eps Lap(u) - u_x + u = f`` with a layer of each type."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    s = np.sqrt(eps)
    ey = 1.0 - np.exp(-1.0 / s)

    def u(x, y):
        return _parabolic_x(x, eps) * _parabolic_y(y, eps)

    def f(x, y):
        X = _parabolic_x(x, eps)
        Y = _parabolic_y(y, eps)
        # -eps X'' - X' with the e^{-x/eps} terms cancelled analytically
        lx = eps * (np.pi ** 2 / 4) * np.cos(0.5 * np.pi * x) + 0.5 * np.pi * np.sin(0.5 * np.pi * x)
        # -eps Y''
        ly = np.exp(-y / s) / ey + 3.75 * eps * np.sqrt(y)
        return lx * Y + X * ly + X * Y

    problem = Problem2D(
        c1=_const(1.0), c2=_const(0.0), r=_const(1.0), f=f,
        c1_lower=c1_lower, c2_lower=None, layer_case=LayerCase.PARABOLIC_EXPONENTIAL,
    )
    return ManufacturedCase(problem, u, eps)


def exponential_case(eps: float, c1_lower: float = 1.99, c2_lower: float = 2.99) -> ManufacturedCase:
    """``-eps Lap(u) - 2 u_x - 3 u_y + u = f`` with two exponential layers."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")

    def u(x, y):
        return (np.cos(0.5 * np.pi * x) * (1.0 - np.exp(-2.0 * x / eps))
                * (1.0 - y) ** 3 * (1.0 - np.exp(-3.0 * y / eps)))

    def f(x, y):
        g = np.cos(0.5 * np.pi * x)
        g1 = -0.5 * np.pi * np.sin(0.5 * np.pi * x)
        g2 = -(np.pi ** 2 / 4) * g
        v = np.exp(-2.0 * x / eps)
        q = (1.0 - y) ** 3
        q1 = -3.0 * (1.0 - y) ** 2
        q2 = 6.0 * (1.0 - y)
        w = np.exp(-3.0 * y / eps)
        X = g * (1.0 - v)
        Y = q * (1.0 - w)
        # v and w are annihilated by -eps d^2 - 2 d_x and -eps d^2 - 3 d_y,
        # leaving only the product-rule cross terms
        lx = (-eps * g2 - 2.0 * g1) - v * (-eps * g2 + 2.0 * g1)
        ly = (-eps * q2 - 3.0 * q1) - w * (-eps * q2 + 3.0 * q1)
        return lx * Y + X * ly + X * Y

    problem = Problem2D(
        c1=_const(2.0), c2=_const(3.0), r=_const(1.0), f=f,
        c1_lower=c1_lower, c2_lower=c2_lower, layer_case=LayerCase.TWO_EXPONENTIAL,
    )
    return ManufacturedCase(problem, u, eps)


def manufactured_case(layer_case: LayerCase, eps: float) -> ManufacturedCase:
    if layer_case is LayerCase.PARABOLIC_EXPONENTIAL:
        return parabolic_case(eps)
    return exponential_case(eps)
