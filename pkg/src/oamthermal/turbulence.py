"""Kolmogorov phase screens and the OAM crosstalk they induce."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import TextIO

import numpy as np

from .analysis import OamSpectrum, signed_range
from .detection import CoherentState
from .errors import GridError, ParameterError
from .lg_modes import GridSpec, lg_basis

WEAK_STRENGTH = 0.5
KOLMOGOROV_COEFF = 0.023
STRUCTURE_COEFF = 6.88


@dataclass(frozen=True)
class TurbulenceParams:
    """Screen statistics and sampling.

    ``fried_parameter`` is ``r0`` in meters; ``inf`` means no turbulence.
    """

    fried_parameter: float
    grid: GridSpec
    seed: int = 0
    subharmonics: bool = True

    def __post_init__(self):
        if not self.fried_parameter > 0:
            raise ParameterError("Fried parameter must be positive")

    @classmethod
    def from_strength(cls, strength: float, waist: float, grid: GridSpec,
                      seed: int = 0, subharmonics: bool = True) -> "TurbulenceParams":
        """Build from scintillation strength ``s = D / r0`` with ``D = 2 waist``."""
        if strength < 0:
            raise ParameterError("strength must be nonnegative")
        r0 = np.inf if strength == 0 else 2.0 * waist / strength
        return cls(r0, grid, seed, subharmonics)

    def with_seed(self, seed: int) -> "TurbulenceParams":
        return TurbulenceParams(self.fried_parameter, self.grid, seed, self.subharmonics)


@dataclass(frozen=True, eq=False)
class PhaseScreen:
    phase: np.ndarray
    params: TurbulenceParams

    def write_table(self, fh: TextIO):
        fh.write(f"# fried_parameter={float(self.params.fried_parameter)!r}\n")
        fh.write(f"# seed={self.params.seed}\n")
        for row in self.phase:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


SUBHARMONIC_LEVELS = 10
_CELL_SUBSAMPLES = 16


def _cell_average(kx, ky, moment: bool = False) -> np.ndarray:
    """Average of ``|k|^(-11/3)`` over unit cells centered at ``(kx, ky)``.

    With ``moment`` the average of ``|k|^(-5/3)`` divided by ``|k_c|^2`` is
    returned instead, which reproduces the small-separation (tilt) part of
    the structure function exactly for cells near the origin.
    """
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    offsets = (np.arange(_CELL_SUBSAMPLES) + 0.5) / _CELL_SUBSAMPLES - 0.5
    acc = np.zeros(np.broadcast(kx, ky).shape)
    for a in offsets:
        for b in offsets:
            k = np.hypot(kx + a, ky + b)
            acc += k ** (-5.0 / 3.0) if moment else k ** (-11.0 / 3.0)
    acc /= _CELL_SUBSAMPLES ** 2
    if moment:
        acc /= kx ** 2 + ky ** 2
    return acc


@lru_cache(maxsize=4)
def _fft_weights(n: int) -> np.ndarray:
    """Dimensionless spectral weight of each FFT cell (frequency in units of 1/extent)."""
    k1 = np.fft.fftfreq(n, d=1.0 / n)
    kx, ky = np.meshgrid(k1, k1)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = _cell_average(kx, ky)
    ring = (np.abs(kx) <= 1) & (np.abs(ky) <= 1)
    ring[0, 0] = False
    w[ring] = _cell_average(kx[ring], ky[ring], moment=True)
    w[0, 0] = 0.0
    w.setflags(write=False)
    return w


@lru_cache(maxsize=1)
def _subharmonic_weights() -> tuple:
    cells = [(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1) if (i, j) != (0, 0)]
    w = _cell_average([c[0] for c in cells], [c[1] for c in cells], moment=True)
    return tuple(cells), w


def generate_phase_screen(params: TurbulenceParams) -> PhaseScreen:
    """Kolmogorov screen by FFT spectral synthesis.

    Complex white noise is filtered by the square root of the phase power
    spectrum ``0.023 r0^(-5/3) f^(-11/3)`` (``f`` in cycles per meter)
    integrated over each frequency cell, transformed, and the real part kept.
    The zero-frequency cell is dropped.  With ``subharmonics`` the missing
    low-frequency power is added from nested 3x3 sub-grids and the piston
    removed afterwards.
    """
    grid = params.grid
    n = grid.samples_per_axis
    r0 = params.fried_parameter
    if np.isinf(r0):
        return PhaseScreen(np.zeros((n, n)), params)
    rng = np.random.default_rng(params.seed)
    df = 1.0 / grid.physical_extent
    scale = KOLMOGOROV_COEFF * r0 ** (-5.0 / 3.0) * df ** (-5.0 / 3.0)
    amp = np.sqrt(scale * _fft_weights(n))
    noise = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    phase = np.real(np.fft.ifft2(noise * amp)) * n * n
    if params.subharmonics:
        phase = phase + _subharmonics(grid, scale, rng)
        phase = phase - phase.mean()
    return PhaseScreen(phase, params)


def _subharmonics(grid: GridSpec, scale: float, rng: np.random.Generator) -> np.ndarray:
    ax = grid.axis()
    df = 1.0 / grid.physical_extent
    cells, weights = _subharmonic_weights()
    out = np.zeros((grid.samples_per_axis, grid.samples_per_axis))
    for level in range(1, SUBHARMONIC_LEVELS + 1):
        shrink = 3.0 ** -level
        for (i, j), w in zip(cells, weights):
            # Cell of side `shrink` centered at shrink*(i, j): weight scales as shrink^(-5/3).
            amp = np.sqrt(scale * w * shrink ** (-5.0 / 3.0))
            c = amp * (rng.standard_normal() + 1j * rng.standard_normal())
            fx, fy = i * shrink * df, j * shrink * df
            wave = np.outer(np.exp(2j * np.pi * fy * ax), np.exp(2j * np.pi * fx * ax))
            out += np.real(c * wave)
    return out


def structure_function(phase: np.ndarray, max_shift: int) -> np.ndarray:
    """Mean squared phase difference for shifts ``0 .. max_shift`` cells.

    Averages over both axes without wrap-around.
    """
    d = np.zeros(max_shift + 1)
    for s in range(1, max_shift + 1):
        dx = phase[:, s:] - phase[:, :-s]
        dy = phase[s:, :] - phase[:-s, :]
        d[s] = 0.5 * (np.mean(dx ** 2) + np.mean(dy ** 2))
    return d


@dataclass(frozen=True, eq=False)
class CrosstalkMatrix:
    """Mode-coupling amplitudes ``c[out, in]`` over ``ell = -l_max .. l_max``."""

    c: np.ndarray

    @property
    def l_max(self) -> int:
        return (self.c.shape[0] - 1) // 2

    @property
    def ells(self) -> np.ndarray:
        return signed_range(self.l_max)

    def column_norms(self) -> np.ndarray:
        return np.sum(np.abs(self.c) ** 2, axis=0)

    def write_table(self, fh: TextIO):
        fh.write("ell_out,ell_in,re,im\n")
        ells = self.ells
        for i, lo in enumerate(ells):
            for k, li in enumerate(ells):
                z = self.c[i, k]
                fh.write(f"{lo},{li},{float(z.real)!r},{float(z.imag)!r}\n")


def crosstalk_matrix(screen: PhaseScreen, waist: float, l_max: int) -> CrosstalkMatrix:
    """``c[l', l] = overlap(LG_l', exp(i phase) LG_l)`` on the screen grid."""
    grid = screen.params.grid
    basis = lg_basis(waist, l_max, grid)
    if not np.any(screen.phase):
        c = basis.conj() @ basis.T * grid.cell_area
    else:
        phasor = np.exp(1j * screen.phase).ravel()
        c = basis.conj() @ (basis * phasor).T * grid.cell_area
    return CrosstalkMatrix(c)


def _check_dims(n_state: int, m: CrosstalkMatrix):
    if m.c.shape != (n_state, n_state):
        raise GridError(f"state of length {n_state} does not match matrix {m.c.shape}")


def propagate_incoherent(p: OamSpectrum, m: CrosstalkMatrix) -> OamSpectrum:
    """Push a mixed state's populations through the channel."""
    _check_dims(len(p.ells), m)
    if not np.array_equal(p.ells, m.ells):
        raise GridError("spectrum must span -l_max .. l_max in order")
    return OamSpectrum.from_weights(m.ells, np.abs(m.c) ** 2 @ p.p)


def propagate_coherent(state: CoherentState, m: CrosstalkMatrix) -> OamSpectrum:
    """Push a pure state's amplitudes through the channel; populations out."""
    _check_dims(len(state.a), m)
    if not np.array_equal(state.ells, m.ells):
        raise GridError("state must span -l_max .. l_max in order")
    return OamSpectrum.from_weights(m.ells, np.abs(m.c @ state.a) ** 2)


def ensemble_average(state: CoherentState, params: TurbulenceParams, n_masks: int,
                     waist: float) -> OamSpectrum:
    """Average of coherent outputs over ``n_masks`` screens seeded ``seed + i``."""
    if n_masks < 1:
        raise ParameterError("n_masks must be >= 1")
    total = np.zeros(len(state.a))
    for i in range(n_masks):
        screen = generate_phase_screen(params.with_seed(params.seed + i))
        out = propagate_coherent(state, crosstalk_matrix(screen, waist, state.l_max))
        total += out.p
    return OamSpectrum.from_weights(state.ells, total / n_masks)
