"""Reference grids, staggered difference operators and density transport.

The 1D layout is a staggered grid on [x_min, x_max]: M_x cells of width h,
node fields of length M_x+1 (trajectories live here) and midpoint fields of
length M_x (densities live here).  Two difference operators connect the
layouts,

    (D_h x)_{j+1/2} = (x_{j+1} - x_j) / h        nodes -> midpoints,
    (d_h u)_j       = (u_{j+1/2} - u_{j-1/2}) / h midpoints -> interior nodes,

together with the matching quadratures (u, v)_h (midpoint) and [u, v]_h
(node, half-weighted endpoints).  For zero-boundary node fields the pair
satisfies the summation-by-parts identity (D_h u, v)_h = -[u, d_h v]_h.

The 2D layout is a tensor-product node grid; the deformation determinant is
the central-difference 2x2 determinant at interior nodes.  Densities are
recovered by pushforward: values are transported (non-conservative) or
divided by the local volume change (conservative).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AdmissibilityError

__all__ = [
    "Grid1D",
    "Grid2D",
    "Trajectory1D",
    "Trajectory2D",
    "DensityField1D",
    "DensityField2D",
    "forward_diff",
    "midpoint_diff",
    "node_diff",
    "inner_product",
    "jacobian_det_2d",
    "jacobian_det_interior",
    "pushforward_density_1d",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid1D:
    """Uniform reference grid with M_x cells on [x_min, x_max]."""

    x_min: float
    x_max: float
    m_x: int
    h: float = field(init=False)
    nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m_x < 2:
            raise ValueError(f"need at least 2 cells, got m_x={self.m_x}")
        if not self.x_max > self.x_min:
            raise ValueError(f"empty extent [{self.x_min}, {self.x_max}]")
        h = (self.x_max - self.x_min) / self.m_x
        nodes = self.x_min + h * np.arange(self.m_x + 1)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "nodes", _readonly(nodes))

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.nodes[:-1] + self.nodes[1:])

    @property
    def length(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class Grid2D:
    """Tensor-product node grid; index [i, j] is (row = y, column = x)."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    m_x: int
    m_y: int
    h_x: float = field(init=False)
    h_y: float = field(init=False)
    ref_x: np.ndarray = field(init=False, repr=False)
    ref_y: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.m_x < 2 or self.m_y < 2:
            raise ValueError(f"need at least 2 cells per direction, got ({self.m_x}, {self.m_y})")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError("empty extent")
        h_x = (self.x_max - self.x_min) / self.m_x
        h_y = (self.y_max - self.y_min) / self.m_y
        xs = self.x_min + h_x * np.arange(self.m_x + 1)
        ys = self.y_min + h_y * np.arange(self.m_y + 1)
        ref_x, ref_y = np.meshgrid(xs, ys)
        object.__setattr__(self, "h_x", h_x)
        object.__setattr__(self, "h_y", h_y)
        object.__setattr__(self, "ref_x", _readonly(ref_x))
        object.__setattr__(self, "ref_y", _readonly(ref_y))

    @property
    def node_shape(self) -> tuple[int, int]:
        return (self.m_y + 1, self.m_x + 1)


def _check_node(x, grid: Grid1D, name: str = "x"):
    x = np.asarray(x)
    if x.shape != (grid.m_x + 1,):
        raise ValueError(f"{name}: expected node field of length {grid.m_x + 1}, got shape {x.shape}")
    return x


def _check_mid(u, grid: Grid1D, name: str = "u"):
    u = np.asarray(u)
    if u.shape != (grid.m_x,):
        raise ValueError(f"{name}: expected midpoint field of length {grid.m_x}, got shape {u.shape}")
    return u


def forward_diff(x, grid: Grid1D) -> np.ndarray:
    """Cell slopes (D_h x)_{j+1/2} = (x_{j+1} - x_j)/h; nodes -> midpoints."""
    x = _check_node(x, grid)
    return np.diff(x) / grid.h


def midpoint_diff(u, grid: Grid1D) -> np.ndarray:
    """(d_h u)_j = (u_{j+1/2} - u_{j-1/2})/h at interior nodes j = 1..M_x-1."""
    u = _check_mid(u, grid)
    return np.diff(u) / grid.h


def node_diff(x, grid: Grid1D) -> np.ndarray:
    """d_h of a trajectory at every node, one-sided at the two endpoints.

    Interior nodes use the midpoint stencil, which for midpoints built from
    ``x`` itself collapses to (x_{j+1} - x_{j-1})/(2h).  At j = 0 and j = M_x
    the half-cell one-sided difference equals the adjacent cell slope.
    """
    x = _check_node(x, grid)
    out = np.empty_like(x)
    out[1:-1] = (x[2:] - x[:-2]) / (2.0 * grid.h)
    out[0] = (x[1] - x[0]) / grid.h
    out[-1] = (x[-1] - x[-2]) / grid.h
    return out


def inner_product(kind: str, u, v, grid: Grid1D) -> float:
    """Discrete inner product; ``kind`` is "midpoint" for (u,v)_h, "node" for [u,v]_h."""
    if kind == "midpoint":
        u = _check_mid(u, grid, "u")
        v = _check_mid(v, grid, "v")
        return float(grid.h * np.dot(u, v))
    if kind == "node":
        u = _check_node(u, grid, "u")
        v = _check_node(v, grid, "v")
        s = np.dot(u[1:-1], v[1:-1]) + 0.5 * (u[0] * v[0] + u[-1] * v[-1])
        return float(grid.h * s)
    raise ValueError(f"unknown inner product kind {kind!r}")


@dataclass(frozen=True)
class Trajectory1D:
    """Two most recent node trajectories plus the step that separates them.

    ``pinned`` marks Dirichlet runs where both endpoints coincide with the
    reference; free-boundary runs (moving support) drop that constraint but
    still require strictly increasing nodes.
    """

    prev: np.ndarray
    curr: np.ndarray
    tau_prev: float
    time: float
    step_index: int
    grid: Grid1D
    pinned: bool = True

    def __post_init__(self):
        prev = _readonly(_check_node(self.prev, self.grid, "prev"))
        curr = _readonly(_check_node(self.curr, self.grid, "curr"))
        object.__setattr__(self, "prev", prev)
        object.__setattr__(self, "curr", curr)
        if self.tau_prev <= 0.0:
            raise ValueError(f"tau_prev must be positive, got {self.tau_prev}")
        if np.any(np.diff(curr) <= 0.0):
            raise AdmissibilityError("trajectory nodes are not strictly increasing")
        if self.pinned:
            ref = self.grid.nodes
            if not (np.isclose(curr[0], ref[0]) and np.isclose(curr[-1], ref[-1])):
                raise ValueError("pinned trajectory must keep boundary nodes on the reference")


@dataclass(frozen=True)
class Trajectory2D:
    """Two most recent 2D node maps (x, y components stored separately)."""

    prev_x: np.ndarray
    prev_y: np.ndarray
    curr_x: np.ndarray
    curr_y: np.ndarray
    tau_prev: float
    time: float
    step_index: int
    grid: Grid2D

    def __post_init__(self):
        shape = self.grid.node_shape
        for name in ("prev_x", "prev_y", "curr_x", "curr_y"):
            a = np.asarray(getattr(self, name))
            if a.shape != shape:
                raise ValueError(f"{name}: expected shape {shape}, got {a.shape}")
            object.__setattr__(self, name, _readonly(a))
        if self.tau_prev <= 0.0:
            raise ValueError(f"tau_prev must be positive, got {self.tau_prev}")
        det = jacobian_det_interior(self.curr_x, self.curr_y, self.grid)
        if np.any(det <= 0.0):
            raise AdmissibilityError("non-positive deformation determinant at an interior node")
        for comp, ref in ((self.curr_x, self.grid.ref_x), (self.curr_y, self.grid.ref_y)):
            b = np.concatenate([comp[0], comp[-1], comp[:, 0], comp[:, -1]])
            rb = np.concatenate([ref[0], ref[-1], ref[:, 0], ref[:, -1]])
            if not np.allclose(b, rb):
                raise ValueError("boundary nodes must coincide with the reference")


@dataclass(frozen=True)
class DensityField1D:
    """Nonnegative midpoint density attached to its reference grid."""

    values: np.ndarray
    grid: Grid1D

    def __post_init__(self):
        v = _readonly(_check_mid(self.values, self.grid, "values"))
        object.__setattr__(self, "values", v)
        if np.any(v < 0.0):
            raise ValueError("density values must be nonnegative")


@dataclass(frozen=True)
class DensityField2D:
    """Nonnegative node density attached to its reference grid."""

    values: np.ndarray
    grid: Grid2D

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != self.grid.node_shape:
            raise ValueError(f"values: expected shape {self.grid.node_shape}, got {v.shape}")
        object.__setattr__(self, "values", _readonly(v))
        if np.any(self.values < 0.0):
            raise ValueError("density values must be nonnegative")


def jacobian_det_interior(x, y, grid: Grid2D) -> np.ndarray:
    """Central-difference deformation determinant at all interior nodes.

    Returns an array of shape (m_y-1, m_x-1); entry (i-1, j-1) is the
    determinant at node (i, j).
    """
    x = np.asarray(x)
    y = np.asarray(y)
    x_x = (x[1:-1, 2:] - x[1:-1, :-2]) / (2.0 * grid.h_x)
    x_y = (x[2:, 1:-1] - x[:-2, 1:-1]) / (2.0 * grid.h_y)
    y_x = (y[1:-1, 2:] - y[1:-1, :-2]) / (2.0 * grid.h_x)
    y_y = (y[2:, 1:-1] - y[:-2, 1:-1]) / (2.0 * grid.h_y)
    return x_x * y_y - y_x * x_y


def jacobian_det_2d(x, y, grid: Grid2D, i: int, j: int) -> float:
    """Deformation determinant at one interior node (i, j).

    The central stencil is undefined on the boundary ring, where nodes stay
    pinned to the reference; asking for it is an error.
    """
    if not (1 <= i <= grid.m_y - 1 and 1 <= j <= grid.m_x - 1):
        raise ValueError(f"determinant stencil undefined at boundary node ({i}, {j})")
    x = np.asarray(x)
    y = np.asarray(y)
    x_x = (x[i, j + 1] - x[i, j - 1]) / (2.0 * grid.h_x)
    x_y = (x[i + 1, j] - x[i - 1, j]) / (2.0 * grid.h_y)
    y_x = (y[i, j + 1] - y[i, j - 1]) / (2.0 * grid.h_x)
    y_y = (y[i + 1, j] - y[i - 1, j]) / (2.0 * grid.h_y)
    return float(x_x * y_y - y_x * x_y)


def pushforward_density_1d(rho0, x, grid: Grid1D) -> DensityField1D:
    """Conservative recovery rho_{j+1/2} = rho0_{j+1/2} / (D_h x)_{j+1/2}."""
    rho0 = _check_mid(rho0, grid, "rho0")
    slopes = forward_diff(x, grid)
    if np.any(slopes <= 0.0):
        raise AdmissibilityError("pushforward needs strictly increasing node positions")
    return DensityField1D(rho0 / slopes, grid)
