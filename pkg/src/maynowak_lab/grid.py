"""Cell-centred finite-volume grids with homogeneous Neumann boundaries.

Three geometries are supported: an interval ``(0, L)``, a rectangle
``(0, Lx) x (0, Ly)`` and a radially symmetric disk of radius ``R`` (stored
as a 1D array over ``r`` but carrying the measure of the 2D disk).

Fields are plain ``numpy`` arrays of shape ``grid.shape``.  Every operator
below is written in flux form: fluxes live on the interior faces, boundary
faces carry zero flux, so the discrete divergence theorem holds to rounding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

MIN_CELLS = 4


class Geometry(str, enum.Enum):
    INTERVAL = "interval"
    RECTANGLE = "rectangle"
    RADIAL_DISK = "radial_disk"


class GridError(ValueError):
    """Raised for invalid grid specifications or mismatched fields."""


@dataclass(frozen=True)
class GridSpec:
    """Geometry plus number of cells per dimension.

    ``lengths`` holds ``(L,)`` for an interval, ``(Lx, Ly)`` for a rectangle
    and ``(R,)`` for a radial disk.
    """

    geometry: Geometry
    lengths: tuple[float, ...]
    cells: tuple[int, ...]

    def __post_init__(self) -> None:
        geometry = Geometry(self.geometry)
        object.__setattr__(self, "geometry", geometry)
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))
        ndim = 2 if geometry is Geometry.RECTANGLE else 1
        if len(self.lengths) != ndim or len(self.cells) != ndim:
            raise GridError(
                f"{geometry.value} needs {ndim} length(s) and {ndim} cell count(s), "
                f"got lengths={self.lengths} cells={self.cells}"
            )
        for length in self.lengths:
            if not (math.isfinite(length) and length > 0.0):
                raise GridError(f"lengths must be finite and positive, got {self.lengths}")
        for c in self.cells:
            if c < MIN_CELLS:
                raise GridError(f"need at least {MIN_CELLS} cells per dimension, got {self.cells}")

    @classmethod
    def interval(cls, length: float, cells: int) -> GridSpec:
        return cls(Geometry.INTERVAL, (length,), (cells,))

    @classmethod
    def rectangle(cls, lx: float, ly: float, cells: tuple[int, int]) -> GridSpec:
        return cls(Geometry.RECTANGLE, (lx, ly), tuple(cells))

    @classmethod
    def radial_disk(cls, radius: float, cells: int) -> GridSpec:
        return cls(Geometry.RADIAL_DISK, (radius,), (cells,))


@dataclass(frozen=True, eq=False)
class Grid:
    """Discretised domain built by :func:`build_grid`.

    Per axis ``a`` the grid keeps a one-dimensional metric: ``face_areas[a]``
    (length ``cells[a] + 1``, zero on the two boundary faces) and
    ``line_volumes[a]`` (length ``cells[a]``).  A flux ``F`` on the faces of
    that axis has discrete divergence
    ``(A[i+1] F[i+1] - A[i] F[i]) / V[i]``.
    """

    spec: GridSpec
    spacing: tuple[float, ...]
    centers: tuple[np.ndarray, ...]
    face_areas: tuple[np.ndarray, ...]
    line_volumes: tuple[np.ndarray, ...]
    cell_volumes: np.ndarray
    total_volume: float
    dimension: int = 1
    bands: tuple = field(default=(), repr=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.spec.cells

    @property
    def ndim(self) -> int:
        """Number of array axes (1 for interval and radial disk)."""
        return len(self.spec.cells)

    @property
    def dx(self) -> float:
        return self.spacing[0]

    @property
    def dy(self) -> float:
        if self.ndim < 2:
            raise AttributeError("dy is only defined on a rectangle")
        return self.spacing[1]

    @property
    def h_min(self) -> float:
        return min(self.spacing)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.centers, indexing="ij"))

    def integrate(self, values: np.ndarray) -> float:
        """Midpoint-rule integral over the domain."""
        return float(np.sum(values * self.cell_volumes))

    def mean(self, values: np.ndarray) -> float:
        return self.integrate(values) / self.total_volume

    def check_field(self, values: np.ndarray, name: str = "field") -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise GridError(f"{name} has shape {values.shape}, grid expects {self.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError(f"{name} contains non-finite values")
        return values

    def _expand(self, arr: np.ndarray, axis: int) -> np.ndarray:
        """Reshape a per-axis 1D array so it broadcasts along ``axis``."""
        shape = [1] * self.ndim
        shape[axis] = arr.shape[0]
        return arr.reshape(shape)

    def face_gradient(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Central difference across the interior faces of ``axis``."""
        return np.diff(f, axis=axis) / self.spacing[axis]

    def pad_faces(self, flux: np.ndarray, axis: int) -> np.ndarray:
        """Extend an interior-face array by the two zero boundary faces of ``axis``."""
        shape = list(flux.shape)
        shape[axis] += 2
        out = np.zeros(shape)
        index = [slice(None)] * self.ndim
        index[axis] = slice(1, -1)
        out[tuple(index)] = flux
        return out

    def flux_divergence(self, flux: np.ndarray, axis: int) -> np.ndarray:
        """Divergence of an interior-face flux; boundary faces carry zero flux."""
        area = self._expand(self.face_areas[axis], axis)
        weighted = self.pad_faces(flux, axis) * area
        return np.diff(weighted, axis=axis) / self._expand(self.line_volumes[axis], axis)

    def face_volumes(self, axis: int) -> np.ndarray:
        """Measure attributed to each interior face of ``axis`` (for face quadrature)."""
        inner = self.face_areas[axis][1:-1] * self.spacing[axis]
        other = 1.0
        for b, h in enumerate(self.spacing):
            if b != axis:
                other *= h
        return self._expand(inner * other, axis)

    def axis_bands(self, axis: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Tridiagonal bands ``(lower, diag, upper)`` of the 1D Laplacian along ``axis``.

        ``lower[0]`` and ``upper[-1]`` are zero.  The arrays are shared; do
        not modify them.
        """
        return self.bands[axis]


def build_grid(spec: GridSpec) -> Grid:
    geometry = spec.geometry
    spacing = tuple(length / n for length, n in zip(spec.lengths, spec.cells))
    centers = tuple((np.arange(n) + 0.5) * h for n, h in zip(spec.cells, spacing))

    if geometry is Geometry.RADIAL_DISK:
        (dr,) = spacing
        (n,) = spec.cells
        faces = np.arange(n + 1) * dr
        area = 2.0 * math.pi * faces
        area[0] = 0.0
        area[-1] = 0.0
        # annulus measure pi (r_{i+1}^2 - r_i^2) = 2 pi r_i dr at the centre r_i
        line_vol = 2.0 * math.pi * centers[0] * dr
        face_areas = (area,)
        line_volumes = (line_vol,)
        cell_volumes = line_vol.copy()
        total = math.pi * spec.lengths[0] ** 2
        dimension = 2
    else:
        face_areas = []
        line_volumes = []
        for n, h in zip(spec.cells, spacing):
            area = np.ones(n + 1)
            area[0] = 0.0
            area[-1] = 0.0
            face_areas.append(area)
            line_volumes.append(np.full(n, h))
        face_areas = tuple(face_areas)
        line_volumes = tuple(line_volumes)
        cell_volumes = np.full(spec.cells, math.prod(spacing))
        total = math.prod(spec.lengths)
        dimension = len(spec.cells)

    bands = []
    for area, vol, h in zip(face_areas, line_volumes, spacing):
        k = area / h
        lower = k[:-1] / vol
        upper = k[1:] / vol
        bands.append((lower, -(lower + upper), upper))

    return Grid(
        bands=tuple(bands),
        spec=spec,
        spacing=spacing,
        centers=centers,
        face_areas=face_areas,
        line_volumes=line_volumes,
        cell_volumes=cell_volumes,
        total_volume=float(total),
        dimension=dimension,
    )


def neumann_laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Conservative five-point (three-point in 1D) Laplacian with zero-flux walls.

    On the radial disk this is ``(1/r) (r f_r)_r``; the face at ``r = 0`` has
    zero area, which encodes the symmetry condition.
    """
    out = np.zeros(grid.shape)
    for axis in range(grid.ndim):
        out += grid.flux_divergence(grid.face_gradient(f, axis), axis)
    return out


def _upwind_flux(grid: Grid, u: np.ndarray, v: np.ndarray, axis: int) -> np.ndarray:
    g = grid.face_gradient(v, axis)
    n = u.shape[axis]
    left = np.take(u, np.arange(n - 1), axis=axis)
    right = np.take(u, np.arange(1, n), axis=axis)
    return np.where(g > 0.0, left, right) * g


def chemotactic_divergence(grid: Grid, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Return ``-div(u grad v)`` with ``u`` upwinded by the sign of ``grad v``."""
    out = np.zeros(grid.shape)
    for axis in range(grid.ndim):
        out -= grid.flux_divergence(_upwind_flux(grid, u, v, axis), axis)
    return out


def chemotactic_outflow_rate(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Per-cell rate at which the upwind transport drains ``u`` out of the cell.

    An explicit Euler step of ``u_t = -div(u grad v)`` keeps ``u >= 0`` as long
    as ``dt * rate <= 1`` in every cell.
    """
    rate = np.zeros(grid.shape)
    for axis in range(grid.ndim):
        flux = grid.pad_faces(grid.face_gradient(v, axis), axis)
        flux *= grid._expand(grid.face_areas[axis], axis)
        n = grid.shape[axis]
        lo = np.take(flux, np.arange(n), axis=axis)
        hi = np.take(flux, np.arange(1, n + 1), axis=axis)
        out = np.maximum(hi, 0.0) + np.maximum(-lo, 0.0)
        rate += out / grid._expand(grid.line_volumes[axis], axis)
    return rate


def grad_norm_lq(grid: Grid, v: np.ndarray, q: float) -> float:
    """Face-quadrature ``L^q`` norm of ``grad v``.

    Each face contributes ``|dv/dn|^q`` times its face volume.  For ``q = 2``
    this is exactly the square root of the discrete Dirichlet energy.
    """
    if not q >= 1.0:
        raise ValueError(f"q must be >= 1, got {q}")
    total = 0.0
    for axis in range(grid.ndim):
        g = np.abs(grid.face_gradient(v, axis))
        total += float(np.sum(g**q * grid.face_volumes(axis)))
    return total ** (1.0 / q)


def max_face_gradient(grid: Grid, v: np.ndarray) -> float:
    """Largest face-normal difference quotient of ``v``; proxy for ``|grad v|_inf``."""
    return max(
        (float(np.max(np.abs(grid.face_gradient(v, a)), initial=0.0)) for a in range(grid.ndim)),
        default=0.0,
    )


def dirichlet_energy(grid: Grid, v: np.ndarray) -> float:
    """Discrete ``int |grad v|^2``."""
    return sum(
        float(np.sum(grid.face_gradient(v, a) ** 2 * grid.face_volumes(a))) for a in range(grid.ndim)
    )
