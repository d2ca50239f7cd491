"""Laguerre-Gaussian modes with zero radial index on square sampling grids."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial, pi, sqrt
from typing import Optional, TextIO

import numpy as np

from .errors import GridError, ParameterError, TruncationError

MIN_SAMPLES = 64
# Minimum fraction of analytic mode energy that must fall inside the window.
TRUNCATION_TOLERANCE = 0.999


@dataclass(frozen=True)
class GridSpec:
    """Square grid centered on the optical axis.

    Cell centers sit at ``(i - N//2) * dx`` so that one sample lands exactly
    on the axis.
    """

    samples_per_axis: int
    physical_extent: float

    def __post_init__(self):
        if int(self.samples_per_axis) != self.samples_per_axis or self.samples_per_axis < MIN_SAMPLES:
            raise ParameterError(f"samples_per_axis must be an integer >= {MIN_SAMPLES}")
        if not self.physical_extent > 0:
            raise ParameterError("physical_extent must be positive")

    @property
    def dx(self) -> float:
        return self.physical_extent / self.samples_per_axis

    @property
    def cell_area(self) -> float:
        return self.dx ** 2

    @property
    def center_index(self) -> int:
        return self.samples_per_axis // 2

    def axis(self) -> np.ndarray:
        return (np.arange(self.samples_per_axis) - self.center_index) * self.dx

    def coordinates(self):
        """Return ``(x, y)`` meshes, ``y`` varying along rows."""
        return _coordinates(self)

    def polar(self):
        x, y = self.coordinates()
        return np.hypot(x, y), np.arctan2(y, x)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(self.samples_per_axis * factor, self.physical_extent)


@lru_cache(maxsize=8)
def _coordinates(grid: GridSpec):
    ax = grid.axis()
    x, y = np.meshgrid(ax, ax)
    x.setflags(write=False)
    y.setflags(write=False)
    return x, y


def default_grid(waist: float, l_max: int = 12, samples: int = 512) -> GridSpec:
    """Grid of ``samples`` points wide enough for modes up to ``|ell| = l_max``.

    The extent is 8 waists, widened when needed so the window holds all but
    about 1e-4 of the highest-order mode.
    """
    # Intensity of LG_l0 in t = 2 r^2 / w^2 is a Gamma(l+1) density.
    t_needed = l_max + 1 + 5.0 * sqrt(l_max + 1) + 4.0
    factor = max(8.0, 2.0 * sqrt(t_needed / 2.0))
    return GridSpec(samples, factor * waist)


@dataclass(frozen=True, eq=False)
class TransverseField:
    amplitudes: np.ndarray
    grid: GridSpec
    waist: Optional[float] = None

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex, copy=True)
        n = self.grid.samples_per_axis
        if a.shape != (n, n):
            raise GridError(f"amplitudes shape {a.shape} does not match grid {n}x{n}")
        if not np.all(np.isfinite(a)):
            raise ParameterError("field contains non-finite values")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.cell_area)

    def __add__(self, other: "TransverseField") -> "TransverseField":
        _same_grid(self.grid, other.grid)
        return TransverseField(self.amplitudes + other.amplitudes, self.grid, self.waist)

    def __mul__(self, scalar) -> "TransverseField":
        return TransverseField(self.amplitudes * scalar, self.grid, self.waist)

    __rmul__ = __mul__

    def write_table(self, fh: TextIO):
        """Dump as a plain-text ``row,col,re,im`` table."""
        fh.write(f"# samples_per_axis={self.grid.samples_per_axis}\n")
        fh.write(f"# physical_extent={float(self.grid.physical_extent)!r}\n")
        fh.write("row,col,re,im\n")
        a = self.amplitudes
        for r in range(a.shape[0]):
            for c in range(a.shape[1]):
                z = a[r, c]
                fh.write(f"{r},{c},{float(z.real)!r},{float(z.imag)!r}\n")


def _same_grid(a: GridSpec, b: GridSpec):
    if a != b:
        raise GridError(f"grid mismatch: {a} vs {b}")


def _lg_raw(ell: int, waist: float, grid: GridSpec) -> np.ndarray:
    x, y = grid.coordinates()
    n = abs(ell)
    # (r sqrt2 / w)^|l| exp(i l theta) written as a polynomial in x +- iy.
    z = (x + 1j * np.sign(ell) * y) * (sqrt(2.0) / waist) if ell else 1.0
    norm = sqrt(2.0 / (pi * factorial(n))) / waist
    return norm * z ** n * np.exp(-(x ** 2 + y ** 2) / waist ** 2)


def evaluate_lg(ell: int, waist: float, grid: GridSpec, normalize: bool = True) -> TransverseField:
    """Sample ``LG_{ell,0}`` at its waist plane.

    The returned field is rescaled to unit discrete norm.  Raises
    :class:`TruncationError` if the window holds less than 99.9% of the
    analytic mode energy.
    """
    if not waist > 0:
        raise ParameterError("waist must be positive")
    if grid.physical_extent < 6.0 * waist:
        raise TruncationError(
            f"grid extent {grid.physical_extent:g} is below 6 waists ({6 * waist:g})")
    u = _lg_raw(int(ell), waist, grid)
    captured = float(np.sum(np.abs(u) ** 2) * grid.cell_area)
    if captured < TRUNCATION_TOLERANCE:
        raise TruncationError(
            f"window captures only {captured:.6f} of LG(ell={ell}) energy; enlarge the grid")
    if normalize:
        u = u / sqrt(captured)
    return TransverseField(u, grid, waist)


def overlap(a: TransverseField, b: TransverseField) -> complex:
    """Discrete inner product ``sum conj(a) b dA``."""
    _same_grid(a.grid, b.grid)
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.cell_area)


def apply_phase(field: TransverseField, phase: np.ndarray) -> TransverseField:
    phase = np.asarray(phase, dtype=float)
    if phase.shape != field.amplitudes.shape:
        raise GridError(f"phase shape {phase.shape} does not match field {field.amplitudes.shape}")
    return TransverseField(field.amplitudes * np.exp(1j * phase), field.grid, field.waist)


def spiral_phase(shift: int, grid: GridSpec) -> np.ndarray:
    """Spiral hologram phase ``shift * theta`` that raises OAM by ``shift``."""
    _, theta = grid.polar()
    return shift * theta


@lru_cache(maxsize=4)
def lg_basis(waist: float, l_max: int, grid: GridSpec) -> np.ndarray:
    """Stack of normalized ``LG_{ell,0}`` for ``ell = -l_max .. l_max``.

    Shape ``(2 l_max + 1, N*N)``; cached because crosstalk and decomposition
    evaluate the same basis many times.
    """
    basis = np.stack([evaluate_lg(l, waist, grid).amplitudes.ravel()
                      for l in range(-l_max, l_max + 1)])
    basis.setflags(write=False)
    return basis


def azimuthal_decompose(field: TransverseField, waist: float, l_max: int) -> np.ndarray:
    """Coefficients ``overlap(LG_ell(waist), field)`` for ``ell = -l_max .. l_max``."""
    basis = lg_basis(waist, l_max, field.grid)
    return basis.conj() @ field.amplitudes.ravel() * field.grid.cell_area
