"""Biphoton OAM amplitudes for a Gaussian-pumped down-converter.

The two-photon state is ``sum_l c_|l| |+l, -l>``.  Amplitudes come either
straight from an inverse temperature or from a thin-crystal overlap between
the pump and the two collection modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, TextIO

import numpy as np

from .analysis import OamSpectrum, signed_range
from .errors import ParameterError
from .lg_modes import GridSpec, default_grid, evaluate_lg

DEFAULT_L_MAX = 20


@dataclass(frozen=True, eq=False)
class JointAmplitudes:
    """Schmidt amplitudes ``c[k]`` for ``|ell| = k = 0 .. l_max``.

    ``decay_residual`` is the rms deviation of ``log c`` from a straight
    line in ``|ell|`` (zero for an exactly exponential spectrum); it is only
    set by the overlap constructor.
    """

    c: np.ndarray
    decay_residual: Optional[float] = None

    def __post_init__(self):
        c = np.array(self.c, dtype=float, copy=True)
        if c.ndim != 1 or len(c) < 2:
            raise ParameterError("need amplitudes for at least |ell| = 0, 1")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ParameterError("amplitudes must be finite and nonnegative")
        total = c[0] ** 2 + 2.0 * np.sum(c[1:] ** 2)
        if abs(total - 1.0) > 1e-9:
            raise ParameterError(f"amplitudes not normalized (norm = {total:.12g})")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @classmethod
    def normalized(cls, c, decay_residual=None) -> "JointAmplitudes":
        c = np.asarray(c, dtype=float)
        total = c[0] ** 2 + 2.0 * np.sum(c[1:] ** 2)
        return cls(c / np.sqrt(total), decay_residual)

    @property
    def l_max(self) -> int:
        return len(self.c) - 1

    def amplitude(self, ell: int) -> float:
        k = abs(int(ell))
        return float(self.c[k]) if k <= self.l_max else 0.0

    def write_table(self, fh: TextIO):
        fh.write("ell,c\n")
        for k, v in enumerate(self.c):
            fh.write(f"{k},{float(v)!r}\n")


def joint_amplitudes_thermal(alpha: float, l_max: int = DEFAULT_L_MAX) -> JointAmplitudes:
    """Thermally weighted amplitudes ``sqrt(exp(-alpha(|l|+1)) / Z)``."""
    if not (np.isfinite(alpha) and alpha > 0):
        raise ParameterError(f"alpha must be positive, got {alpha!r}")
    if l_max < 1:
        raise ParameterError("l_max must be >= 1")
    k = np.arange(l_max + 1)
    return JointAmplitudes.normalized(np.exp(-0.5 * alpha * k))


def joint_amplitudes_overlap(pump_waist: float, collection_waist: float,
                             l_max: int = DEFAULT_L_MAX,
                             grid: Optional[GridSpec] = None) -> JointAmplitudes:
    """Amplitudes from the collinear thin-crystal mode overlap.

    ``c_l`` is proportional to ``int E_pump conj(u_l) conj(u_-l) dA`` with a
    Gaussian pump of waist ``pump_waist`` and signal/idler collection modes of
    waist ``collection_waist``, evaluated by quadrature on ``grid``.
    """
    if not (pump_waist > 0 and collection_waist > 0):
        raise ParameterError("waists must be positive")
    if grid is None:
        grid = default_grid(collection_waist, l_max)
    if grid.dx > 0.25 * min(pump_waist, collection_waist):
        raise ParameterError("grid does not resolve the pump and collection waists")
    x, y = grid.coordinates()
    pump = np.exp(-(x ** 2 + y ** 2) / pump_waist ** 2)
    c = np.empty(l_max + 1)
    for k in range(l_max + 1):
        u = evaluate_lg(k, collection_waist, grid).amplitudes
        u_conj_partner = evaluate_lg(-k, collection_waist, grid).amplitudes
        c[k] = np.real(np.sum(pump * np.conj(u) * np.conj(u_conj_partner))) * grid.cell_area
    c = np.maximum(c, 0.0)
    # Enforce the non-increasing contract against quadrature noise in the far tail.
    c = np.minimum.accumulate(c)
    resid = _log_linear_residual(c)
    return JointAmplitudes.normalized(c, resid)


def _log_linear_residual(c: np.ndarray) -> float:
    k = np.arange(len(c))
    ok = c > 1e-12 * c[0]
    if ok.sum() < 3:
        return 0.0
    coef = np.polyfit(k[ok], np.log(c[ok]), 1)
    return float(np.sqrt(np.mean((np.polyval(coef, k[ok]) - np.log(c[ok])) ** 2)))


def overlap_model_alpha(pump_waist: float, collection_waist: float) -> float:
    """Closed-form inverse temperature of the thin-crystal overlap model.

    The Gaussian integral gives ``c_l ~ q^|l|`` with
    ``q = 1 / (1 + w_c^2 / (2 w_p^2))``, hence ``alpha = -2 log q``.
    """
    return 2.0 * float(np.log1p(collection_waist ** 2 / (2.0 * pump_waist ** 2)))


def reduced_spectrum(j: JointAmplitudes) -> OamSpectrum:
    """Signal spectrum after tracing out the idler, ``p(l) = c_|l|^2``."""
    ells = signed_range(j.l_max)
    return OamSpectrum.from_weights(ells, j.c[np.abs(ells)] ** 2)
