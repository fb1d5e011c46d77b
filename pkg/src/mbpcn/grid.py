"""Cell-centred finite differences on a square with zero-flux boundaries.

A cell field is an ``(M, M)`` float64 array with ``u[i, j]`` holding the value
at cell centre ``((i + 1/2) h, (j + 1/2) h)``; the first axis is ``x``.  Row
major flattening ``u.ravel()`` gives the vector ordering used by the dense
Kronecker matrices in :mod:`mbpcn.oracle`.

Edge fields live on cell faces: x-edges are ``(M + 1, M)`` arrays whose row
``k`` sits at ``x = k h``, y-edges are ``(M, M + 1)`` arrays.  The gradient
always returns zero boundary faces, so homogeneous Neumann conditions are
built into the operator instead of being imposed through ghost cells.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Domain2D:
    """Square ``(0, L)^2`` (or ``(-L/2, L/2)^2`` when centred) cut into M x M cells."""

    side_length: float
    cells_per_side: int
    centered: bool = False

    def __post_init__(self):
        if not self.side_length > 0:
            raise ValueError(f"side_length must be positive, got {self.side_length}")
        if int(self.cells_per_side) != self.cells_per_side or self.cells_per_side < 2:
            raise ValueError(f"cells_per_side must be an integer >= 2, got {self.cells_per_side}")

    @property
    def spacing(self) -> float:
        return self.side_length / self.cells_per_side

    @property
    def shape(self) -> tuple[int, int]:
        return (self.cells_per_side, self.cells_per_side)

    @property
    def origin(self) -> float:
        return -0.5 * self.side_length if self.centered else 0.0

    @property
    def area(self) -> float:
        return self.side_length**2

    def centers(self) -> np.ndarray:
        """1D array of cell-centre coordinates, shared by both axes."""
        h = self.spacing
        return self.origin + (np.arange(self.cells_per_side) + 0.5) * h

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        c = self.centers()
        return np.meshgrid(c, c, indexing="ij")

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def check(self, u: np.ndarray) -> np.ndarray:
        """Return ``u`` as a float64 field after validating shape and finiteness."""
        u = np.ascontiguousarray(u, dtype=np.float64)
        if u.shape != self.shape:
            raise ValueError(f"field shape {u.shape} does not match domain {self.shape}")
        if not np.all(np.isfinite(u)):
            raise ValueError("field contains non-finite values")
        return u


def grad(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference gradient onto zero-flux edge fields."""
    m, n = u.shape
    gx = np.zeros((m + 1, n))
    gy = np.zeros((m, n + 1))
    gx[1:-1] = (u[1:] - u[:-1]) / h
    gy[:, 1:-1] = (u[:, 1:] - u[:, :-1]) / h
    return gx, gy


def div(gx: np.ndarray, gy: np.ndarray, h: float) -> np.ndarray:
    return (gx[1:] - gx[:-1]) / h + (gy[:, 1:] - gy[:, :-1]) / h


def laplacian(u: np.ndarray, h: float) -> np.ndarray:
    """Five-point Neumann Laplacian, ``div(grad(u))`` evaluated matrix-free."""
    u = np.ascontiguousarray(u, dtype=np.float64)
    out = np.empty_like(u)
    _kernels.laplacian_into(u, 1.0 / (h * h), out)
    return out


def inner_l2(u: np.ndarray, v: np.ndarray, h: float) -> float:
    return float(h * h * np.sum(u * v))


def average_x(e: np.ndarray) -> np.ndarray:
    """Average an x-edge field onto cells."""
    return 0.5 * (e[1:] + e[:-1])


def average_y(e: np.ndarray) -> np.ndarray:
    return 0.5 * (e[:, 1:] + e[:, :-1])


def inner_edge(
    v: tuple[np.ndarray, np.ndarray], w: tuple[np.ndarray, np.ndarray], h: float
) -> float:
    """Edge inner product ``[v, w]`` of two ``(x-edge, y-edge)`` pairs.

    Each component product is averaged onto cells and then integrated with
    :func:`inner_l2`, so boundary faces carry half weight.
    """
    vx, vy = v
    wx, wy = w
    return float(h * h * (np.sum(average_x(vx * wx)) + np.sum(average_y(vy * wy))))


def norm_l2(u: np.ndarray, h: float) -> float:
    return float(np.sqrt(inner_l2(u, u, h)))


def seminorm_h1(u: np.ndarray, h: float) -> float:
    g = grad(u, h)
    return float(np.sqrt(inner_edge(g, g, h)))


def norm_h1(u: np.ndarray, h: float) -> float:
    return float(np.sqrt(norm_l2(u, h) ** 2 + seminorm_h1(u, h) ** 2))


def norm_sup(u: np.ndarray) -> float:
    """Entrywise maximum absolute value."""
    return float(np.max(np.abs(u)))
