"""Heralded detection: SLM shift masks, fiber projection, idler apertures, counts."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from .analysis import OamSpectrum, signed_range
from .errors import ParameterError, ResolutionError
from .lg_modes import GridSpec, default_grid, evaluate_lg
from .source import JointAmplitudes

DEFAULT_IDLER_WAIST = 0.5e-3


@dataclass(frozen=True)
class MaskOp:
    """Superposition of OAM shift operations, ``sum_m c_m L_{+m}``.

    Each term is ``(shift, weight)``; shifts are distinct.
    """

    terms: Tuple[Tuple[int, complex], ...]

    def __post_init__(self):
        terms = tuple((int(m), complex(c)) for m, c in self.terms)
        if not terms:
            raise ParameterError("mask needs at least one term")
        shifts = [m for m, _ in terms]
        if len(set(shifts)) != len(shifts):
            raise ParameterError("mask shifts must be distinct")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def shift(cls, m: int) -> "MaskOp":
        return cls(((m, 1.0),))

    def weight(self, m: int) -> complex:
        for shift, c in self.terms:
            if shift == m:
                return c
        return 0j


def thermal_superposition_mask(alpha: float, l_max: int, literal_weights: bool = False) -> MaskOp:
    """Mask ``sum_m c_m (L_{+m} + L_{-m})`` with thermally distributed weights.

    By default ``c_m = sqrt(exp(-alpha(m+1)))`` so that, heralded on a flat
    source, the populations are Gibbs populations.  ``literal_weights`` uses
    ``c_m = exp(-alpha(m+1))`` instead.
    """
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    scale = 1.0 if literal_weights else 0.5
    terms = [(0, np.exp(-scale * alpha))]
    for m in range(1, l_max + 1):
        c = np.exp(-scale * alpha * (m + 1))
        terms += [(m, c), (-m, c)]
    return MaskOp(tuple(terms))


@dataclass(frozen=True)
class DetectorConfig:
    """Idler-arm detector: ``bucket``, ``aperture`` (iris) or ``fiber`` projection."""

    kind: str = "bucket"
    diameter: Optional[float] = None
    mask: Optional[MaskOp] = None

    def __post_init__(self):
        if self.kind not in ("bucket", "aperture", "fiber"):
            raise ParameterError(f"unknown detector kind {self.kind!r}")
        if self.kind == "aperture" and not (self.diameter is not None and self.diameter > 0):
            raise ParameterError("aperture diameter must be positive")
        if self.kind == "fiber" and self.mask is None:
            raise ParameterError("fiber projection needs a mask")

    @classmethod
    def bucket(cls) -> "DetectorConfig":
        return cls("bucket")

    @classmethod
    def aperture(cls, diameter: float) -> "DetectorConfig":
        return cls("aperture", diameter=diameter)

    @classmethod
    def fiber_projection(cls, mask: MaskOp) -> "DetectorConfig":
        return cls("fiber", mask=mask)


@dataclass(frozen=True, eq=False)
class CoherentState:
    """Pure heralded single-photon state with amplitude ``a[ell]``."""

    ells: np.ndarray
    a: np.ndarray

    def __post_init__(self):
        ells = np.array(self.ells, dtype=int, copy=True)
        a = np.array(self.a, dtype=complex, copy=True)
        if a.shape != ells.shape:
            raise ParameterError("amplitudes must match ells")
        norm = float(np.sum(np.abs(a) ** 2))
        if abs(norm - 1.0) > 1e-9:
            raise ParameterError(f"state not normalized (norm = {norm:.12g})")
        ells.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "ells", ells)
        object.__setattr__(self, "a", a)

    @property
    def l_max(self) -> int:
        return int(np.max(np.abs(self.ells)))

    def populations(self) -> OamSpectrum:
        return OamSpectrum.from_weights(self.ells, np.abs(self.a) ** 2)

    def density_matrix(self) -> np.ndarray:
        return np.outer(self.a, self.a.conj())

    def purity(self) -> float:
        rho = self.density_matrix()
        return float(np.real(np.trace(rho @ rho)))


def mask_shift_detection(j: JointAmplitudes, m: int) -> float:
    """Coincidence probability with shift mask ``L_{+m}`` on the signal.

    The raised photon couples to the fiber only if it started in
    ``ell = -m``, which the source populates with ``c_|m|^2``.
    """
    if abs(m) > j.l_max:
        raise ParameterError(f"|m| = {abs(m)} exceeds l_max = {j.l_max}")
    norm = j.c[0] ** 2 + 2.0 * np.sum(j.c[1:] ** 2)
    return float(j.c[abs(m)] ** 2 / norm)


def aperture_efficiency(ell: int, diameter: float, waist: float,
                        grid: Optional[GridSpec] = None) -> float:
    """Fraction of ``|LG_ell|^2`` passing a centered iris of the given diameter."""
    if not diameter > 0:
        raise ParameterError("aperture diameter must be positive")
    if grid is None:
        grid = default_grid(waist, max(abs(ell), 12))
    return float(_aperture_efficiencies([ell], diameter, waist, grid)[0])


def _iris(diameter: float, grid: GridSpec) -> np.ndarray:
    if diameter < 8 * grid.dx:
        raise ResolutionError(
            f"aperture of {diameter:g} spans fewer than 8 cells (dx = {grid.dx:g})")
    r, _ = grid.polar()
    # Linear edge antialiasing: fractional transmission across one cell.
    return np.clip((diameter / 2.0 - r) / grid.dx + 0.5, 0.0, 1.0)


def _aperture_efficiencies(ells: Sequence[int], diameter: float, waist: float,
                           grid: GridSpec) -> np.ndarray:
    iris = _iris(diameter, grid)
    out = []
    for ell in ells:
        u = evaluate_lg(ell, waist, grid).amplitudes
        out.append(np.sum(iris * np.abs(u) ** 2) * grid.cell_area)
    return np.clip(np.array(out), 0.0, 1.0)


def heralded_state(j: JointAmplitudes, mask: MaskOp) -> CoherentState:
    """Signal state heralded by an idler mask followed by fiber projection.

    The idler in ``-ell`` reaches ``ell = 0`` through the term with shift
    ``+ell``, leaving the signal with amplitude ``c_|ell| * w_ell``.
    """
    ells = signed_range(j.l_max)
    a = np.array([j.c[abs(l)] * mask.weight(int(l)) for l in ells])
    norm = np.sqrt(np.sum(np.abs(a) ** 2))
    if norm == 0:
        raise ParameterError("mask heralds no signal photons")
    return CoherentState(ells, a / norm)


def heralded_spectrum(j: JointAmplitudes, idler: DetectorConfig,
                      waist: float = DEFAULT_IDLER_WAIST,
                      grid: Optional[GridSpec] = None) -> OamSpectrum:
    """OAM spectrum of signal photons heralded by the idler detector.

    ``waist`` is the idler beam waist at the iris plane; only the
    diameter-to-waist ratio matters.
    """
    ells = signed_range(j.l_max)
    weights = j.c[np.abs(ells)] ** 2
    if idler.kind == "aperture":
        if grid is None:
            grid = default_grid(waist, j.l_max)
        eta = _aperture_efficiencies(range(j.l_max + 1), idler.diameter, waist, grid)
        weights = weights * eta[np.abs(ells)]
    elif idler.kind == "fiber":
        return heralded_state(j, idler.mask).populations()
    return OamSpectrum.from_weights(ells, weights)


def coherent_thermal_state(alpha: float, l_max: int = 20,
                           phases: Optional[np.ndarray] = None,
                           literal_weights: bool = False) -> CoherentState:
    """Pure state whose populations equal the thermal populations.

    ``a_ell = sqrt(exp(-alpha(|ell|+1)) / Z)`` with zero phases unless
    ``phases`` (one per ell) is given.  ``literal_weights`` drops the square
    root, so populations fall off as ``exp(-2 alpha(|ell|+1))``.
    """
    if not (np.isfinite(alpha) and alpha > 0):
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    ells = signed_range(l_max)
    scale = 1.0 if literal_weights else 0.5
    logw = -scale * alpha * (np.abs(ells) + 1.0)
    a = np.exp(logw - 0.5 * logsumexp(2 * logw))
    if phases is not None:
        phases = np.asarray(phases, dtype=float)
        if phases.shape != a.shape:
            raise ParameterError("need one phase per ell")
        a = a * np.exp(1j * phases)
    return CoherentState(ells, a)


def sample_counts(p: OamSpectrum, expected_total: float, seed: int) -> np.ndarray:
    """Independent Poisson counts per bin with mean ``expected_total * p``."""
    if not expected_total > 0:
        raise ParameterError("expected_total must be positive")
    rng = np.random.default_rng(seed)
    return rng.poisson(expected_total * p.p).astype(np.int64)
