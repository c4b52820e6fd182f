"""Piecewise-uniform Shishkin meshes and the region partitions they induce."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class LayerCase(enum.Enum):
    """Which pair of boundary layers a 2D problem exhibits.

    ``PARABOLIC_EXPONENTIAL``: exponential layer at x=0, parabolic layer at y=0.
    ``TWO_EXPONENTIAL``: exponential layers at x=0 and y=0.
    """

    PARABOLIC_EXPONENTIAL = "parabolic"
    TWO_EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class Mesh1D:
    """Mesh ``0 = x_0 < ... < x_N = 1`` with a transition point at ``x_t = tau``."""

    points: np.ndarray
    transition_index: int
    tau: float

    def __post_init__(self):
        x = self.points
        if x.ndim != 1 or x.size < 3:
            raise ValueError("mesh needs at least two intervals")
        if x[0] != 0.0 or x[-1] != 1.0:
            raise ValueError("mesh must span [0, 1]")
        if np.any(np.diff(x) <= 0):
            raise ValueError("mesh points must be strictly increasing")
        if not 0 < self.transition_index < x.size - 1:
            raise ValueError("transition point must be an interior meshpoint")
        x.setflags(write=False)

    @property
    def N(self) -> int:
        return self.points.size - 1

    @property
    def h(self) -> np.ndarray:
        """Interval widths ``h_i = x_i - x_{i-1}``, i = 1..N (length N)."""
        return np.diff(self.points)

    @property
    def hbar(self) -> np.ndarray:
        """``(h_i + h_{i+1}) / 2`` at the interior points i = 1..N-1."""
        h = self.h
        return 0.5 * (h[:-1] + h[1:])

    @property
    def interior(self) -> np.ndarray:
        return self.points[1:-1]

    def decimate(self) -> "Mesh1D":
        """Drop every other mesh line; the transition point survives."""
        if self.N % 4:
            raise ValueError(f"cannot decimate a mesh with N={self.N} intervals into an even mesh")
        return Mesh1D(self.points[::2].copy(), self.transition_index // 2, self.tau)

    def coarsen_layer(self) -> "Mesh1D":
        """Drop every other line in ``[0, tau]`` only; the coarse part is kept."""
        t = self.transition_index
        if t % 2:
            raise ValueError(f"cannot halve a layer of {t} intervals")
        pts = np.concatenate([self.points[:t + 1:2], self.points[t + 1:]])
        return Mesh1D(pts, t // 2, self.tau)


@dataclass(frozen=True)
class Mesh2D:
    x_mesh: Mesh1D
    y_mesh: Mesh1D
    layer_case: LayerCase

    def __post_init__(self):
        if self.x_mesh.N != self.y_mesh.N:
            raise ValueError("only N x N tensor meshes are supported")

    @property
    def N(self) -> int:
        return self.x_mesh.N

    @property
    def tau_x(self) -> float:
        return self.x_mesh.tau

    @property
    def tau_y(self) -> float:
        return self.y_mesh.tau

    def decimate(self) -> "Mesh2D":
        return Mesh2D(self.x_mesh.decimate(), self.y_mesh.decimate(), self.layer_case)

    def coarsen_corner(self) -> "Mesh2D":
        return Mesh2D(self.x_mesh.coarsen_layer(), self.y_mesh.coarsen_layer(), self.layer_case)


def _check_args(eps: float, N: int) -> None:
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    if N < 4 or N % 2:
        raise ValueError(f"N must be even and >= 4, got {N}")


def piecewise_uniform(tau: float, N: int) -> Mesh1D:
    """N/2 equal intervals on [0, tau] and N/2 on [tau, 1]."""
    half = N // 2
    left = np.linspace(0.0, tau, half + 1)
    right = np.linspace(tau, 1.0, half + 1)
    return Mesh1D(np.concatenate([left, right[1:]]), half, float(tau))


def build_shishkin_1d(eps: float, N: int, c_lower: float) -> Mesh1D:
    """Shishkin mesh for a single exponential layer at x=0.

    ``tau = min(1/2, 2 eps ln(N) / c_lower)``.
    """
    _check_args(eps, N)
    if c_lower <= 0:
        raise ValueError("c_lower must be positive")
    tau = min(0.5, 2.0 * eps * np.log(N) / c_lower)
    return piecewise_uniform(tau, N)


def transition_points(eps: float, N: int, layer_case: LayerCase, c1_lower: float,
                      c2_lower: float | None = None, sigma: float = 2.5) -> tuple[float, float]:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if c1_lower <= 0:
        raise ValueError("c1_lower must be positive")
    lnN = np.log(N)
    tau_x = min(0.5, sigma * eps * lnN / c1_lower)
    if layer_case is LayerCase.PARABOLIC_EXPONENTIAL:
        tau_y = min(0.5, sigma * np.sqrt(eps) * lnN)
    else:
        if c2_lower is None or c2_lower <= 0:
            raise ValueError("two exponential layers need a positive c2_lower")
        tau_y = min(0.5, sigma * eps * lnN / c2_lower)
    return tau_x, tau_y


def build_shishkin_2d(eps: float, N: int, layer_case: LayerCase, c1_lower: float,
                      c2_lower: float | None = None, sigma: float = 2.5) -> Mesh2D:
    _check_args(eps, N)
    tau_x, tau_y = transition_points(eps, N, layer_case, c1_lower, c2_lower, sigma)
    return Mesh2D(piecewise_uniform(tau_x, N), piecewise_uniform(tau_y, N), layer_case)


def partition_1d(mesh: Mesh1D) -> tuple[int, int]:
    """Sizes ``(N_L, N_I)`` of the layer and interior unknown sets.

    Unknowns are x_1..x_{N-1}; the transition point belongs to the layer set.
    """
    n_layer = mesh.transition_index
    return n_layer, mesh.N - 1 - n_layer


@dataclass(frozen=True)
class Region:
    """A rectangular block of interior meshpoints, ordered x-fastest.

    ``i0``/``j0`` are the 1-based mesh indices of the block's lower-left point.
    """

    name: str
    i0: int
    j0: int
    nx: int
    ny: int
    offset: int

    @property
    def size(self) -> int:
        return self.nx * self.ny

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)

    def mesh_indices(self) -> np.ndarray:
        """(size, 2) array of (i, j) mesh indices in block order."""
        jj, ii = np.meshgrid(np.arange(self.j0, self.j0 + self.ny),
                             np.arange(self.i0, self.i0 + self.nx), indexing="ij")
        return np.column_stack([ii.ravel(), jj.ravel()])


@dataclass(frozen=True)
class RegionPartition:
    """Corner/edge/interior blocks, stored in the global order C, X, Y, I.

    ``global_index[j-1, i-1]`` is the position of unknown (x_i, y_j) in the
    block-ordered vector.
    """

    N: int
    corner: Region
    edge_x: Region
    edge_y: Region
    interior: Region
    global_index: np.ndarray = field(repr=False)

    @property
    def regions(self) -> tuple[Region, Region, Region, Region]:
        return (self.corner, self.edge_x, self.edge_y, self.interior)

    @property
    def n(self) -> int:
        return (self.N - 1) ** 2

    def to_grid(self, v: np.ndarray) -> np.ndarray:
        """Block-ordered vector -> (N-1, N-1) array indexed [j-1, i-1]."""
        return v[self.global_index]

    def from_grid(self, g: np.ndarray) -> np.ndarray:
        v = np.empty(self.n, dtype=g.dtype)
        v[self.global_index] = g
        return v


def partition_regions(mesh: Mesh2D) -> RegionPartition:
    """Split interior unknowns by ``x_i <= tau_x`` and ``y_j <= tau_y``."""
    N = mesh.N
    tx = mesh.x_mesh.transition_index
    ty = mesh.y_mesh.transition_index
    mx, my = N - 1 - tx, N - 1 - ty

    corner = Region("C", 1, 1, tx, ty, 0)
    edge_x = Region("X", 1, ty + 1, tx, my, corner.size)
    edge_y = Region("Y", tx + 1, 1, mx, ty, edge_x.offset + edge_x.size)
    interior = Region("I", tx + 1, ty + 1, mx, my, edge_y.offset + edge_y.size)

    gidx = np.empty((N - 1, N - 1), dtype=np.int64)
    for reg in (corner, edge_x, edge_y, interior):
        block = np.arange(reg.size).reshape(reg.ny, reg.nx) + reg.offset
        gidx[reg.j0 - 1:reg.j0 - 1 + reg.ny, reg.i0 - 1:reg.i0 - 1 + reg.nx] = block
    gidx.setflags(write=False)
    return RegionPartition(N, corner, edge_x, edge_y, interior, gidx)
