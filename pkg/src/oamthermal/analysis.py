"""Thermal model, fitting, mean energy and KL divergence for OAM spectra.

Spectra are distributions over the signed OAM index ``ell``.  The thermal
model assigns ``p(ell) = exp(-alpha (|ell| + 1)) / Z`` where ``alpha`` is
the dimensionless inverse temperature (energies in units of hbar*omega,
k_B = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import logsumexp, rel_entr

from .errors import DomainError, FitError, ParameterError

DEFAULT_WINDOW = 10

_ALPHA_MIN = 1e-8
_ALPHA_MAX = 200.0


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def signed_range(l_max: int) -> np.ndarray:
    """Return the integer OAM indices ``-l_max .. l_max``."""
    return np.arange(-l_max, l_max + 1)


@dataclass(frozen=True, eq=False)
class OamSpectrum:
    """Normalized probability distribution over OAM indices.

    ``errors`` holds per-bin standard errors of ``p`` (optional).  When the
    spectrum was built from photon counts the raw integer ``counts`` are kept
    so that fits can use the Poisson likelihood.
    """

    ells: np.ndarray
    p: np.ndarray
    errors: Optional[np.ndarray] = None
    counts: Optional[np.ndarray] = None

    def __post_init__(self):
        ells = _frozen(self.ells, dtype=int)
        p = _frozen(self.p)
        if ells.ndim != 1 or p.shape != ells.shape:
            raise DomainError("ells and p must be 1-D arrays of equal length")
        if len(np.unique(ells)) != len(ells):
            raise DomainError("duplicate OAM indices in spectrum")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise DomainError("probabilities must be finite and nonnegative")
        if abs(p.sum() - 1.0) > 1e-9:
            raise DomainError(f"spectrum not normalized (sum = {p.sum():.12g})")
        object.__setattr__(self, "ells", ells)
        object.__setattr__(self, "p", p)
        if self.errors is not None:
            errors = _frozen(self.errors)
            if errors.shape != p.shape:
                raise DomainError("errors must match p")
            object.__setattr__(self, "errors", errors)
        if self.counts is not None:
            counts = _frozen(self.counts, dtype=np.int64)
            if counts.shape != p.shape or np.any(counts < 0):
                raise DomainError("counts must be nonnegative and match p")
            object.__setattr__(self, "counts", counts)

    @classmethod
    def from_weights(cls, ells, weights, errors=None) -> "OamSpectrum":
        """Normalize nonnegative weights into a spectrum.

        ``errors`` are absolute errors on the weights and are scaled alongside.
        """
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise DomainError("weights must have positive sum")
        errs = None if errors is None else np.asarray(errors, dtype=float) / total
        return cls(ells, w / total, errs)

    @classmethod
    def from_counts(cls, ells, counts) -> "OamSpectrum":
        counts = np.asarray(counts)
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise DomainError("counts must be nonnegative integers")
        counts = counts.astype(np.int64)
        total = counts.sum()
        if total == 0:
            raise FitError("all-zero counts")
        return cls(ells, counts / total, poisson_errors(counts) / total, counts)

    @property
    def l_max(self) -> int:
        return int(np.max(np.abs(self.ells)))

    def __len__(self):
        return len(self.ells)

    def value(self, ell: int) -> float:
        idx = np.nonzero(self.ells == ell)[0]
        return float(self.p[idx[0]]) if len(idx) else 0.0

    def as_dict(self) -> dict:
        return {int(l): float(v) for l, v in zip(self.ells, self.p)}

    def windowed(self, window: Optional[int]) -> "OamSpectrum":
        """Restrict to ``|ell| <= window`` and renormalize (None keeps all)."""
        if window is None:
            return self
        keep = np.abs(self.ells) <= window
        if keep.all():
            return self
        if self.counts is not None:
            counts = self.counts[keep]
            if counts.sum() == 0:
                raise FitError("no counts inside the window")
            return OamSpectrum.from_counts(self.ells[keep], counts)
        errs = None if self.errors is None else self.errors[keep]
        return OamSpectrum.from_weights(self.ells[keep], self.p[keep], errs)

    def total_variation(self, other: "OamSpectrum") -> float:
        """Total-variation distance, aligning bins by OAM index."""
        ells = np.union1d(self.ells, other.ells)
        a = np.array([self.value(l) for l in ells])
        b = np.array([other.value(l) for l in ells])
        return 0.5 * float(np.abs(a - b).sum())


def _check_alpha(alpha: float):
    if not (np.isfinite(alpha) and alpha > 0):
        raise ParameterError(f"alpha must be positive and finite, got {alpha!r}")


def partition_function(alpha: float) -> float:
    """Untruncated degenerate partition function ``exp(-alpha) / tanh(alpha/2)``.

    The ground level ``ell = 0`` is single; every ``|ell| >= 1`` level is
    doubly degenerate.
    """
    _check_alpha(alpha)
    return float(np.exp(-alpha) / np.tanh(alpha / 2.0))


def _thermal_on(alpha: float, ells: np.ndarray) -> np.ndarray:
    logw = -alpha * (np.abs(ells) + 1.0)
    return np.exp(logw - logsumexp(logw))


def thermal_pdf(alpha: float, l_max: int) -> OamSpectrum:
    """Thermal spectrum over ``-l_max .. l_max``, renormalized on the window."""
    _check_alpha(alpha)
    if l_max < 0:
        raise ParameterError("l_max must be nonnegative")
    ells = signed_range(l_max)
    return OamSpectrum(ells, _thermal_on(alpha, ells))


def poisson_errors(counts) -> np.ndarray:
    """Poisson standard error ``sqrt(n)``; empty bins get unit error."""
    counts = np.asarray(counts, dtype=float)
    if np.any(counts < 0):
        raise DomainError("counts must be nonnegative")
    return np.where(counts > 0, np.sqrt(counts), 1.0)


def mean_energy(spectrum: OamSpectrum, window: Optional[int] = None) -> float:
    """Mean energy in units of hbar*omega, ``sum p(ell) (|ell| + 1)``."""
    s = spectrum.windowed(window)
    return float(np.sum(s.p * (np.abs(s.ells) + 1.0)))


def kl_divergence(p_m: OamSpectrum, p_f: OamSpectrum,
                  window: Optional[int] = DEFAULT_WINDOW,
                  base: float = np.e) -> float:
    """Kullback-Leibler divergence ``sum p_m log(p_m / p_f)``.

    Both spectra are restricted to ``|ell| <= window`` and renormalized
    first.  Bins are aligned by OAM index.
    """
    m = p_m.windowed(window)
    f = p_f.windowed(window)
    lookup = dict(zip(f.ells.tolist(), f.p.tolist()))
    q = np.array([lookup.get(l, 0.0) for l in m.ells.tolist()])
    if np.any((m.p > 0) & (q <= 0)):
        raise DomainError("p_f vanishes where p_m has support")
    d = float(np.sum(rel_entr(m.p, q)))
    return float(max(d, 0.0) / np.log(base))


@dataclass(frozen=True)
class ThermalFit:
    alpha: float
    Z: float
    stderr_alpha: float
    residual: float
    kl_to_fit: float
    window: Optional[int]
    method: str
    n_total: Optional[int] = field(default=None)

    def model(self, l_max: Optional[int] = None) -> OamSpectrum:
        """Fitted thermal spectrum, by default over the fit window."""
        return thermal_pdf(self.alpha, l_max if l_max is not None else (self.window or DEFAULT_WINDOW))

    def to_record(self) -> dict:
        return {
            "alpha": self.alpha,
            "stderr_alpha": self.stderr_alpha,
            "Z": self.Z,
            "residual": self.residual,
            "kl_to_fit": self.kl_to_fit,
            "window": self.window,
            "method": self.method,
            "n_total": self.n_total,
        }


def _match_mean_level(ells, weights):
    """Root of the likelihood equation: model mean level equals the data's."""
    levels = np.abs(ells) + 1.0
    target = np.sum(weights * levels) / np.sum(weights)

    def model_mean(alpha):
        return float(np.sum(_thermal_on(alpha, ells) * levels))

    if target <= model_mean(_ALPHA_MAX):
        raise FitError("data concentrated in the ground state; alpha unbounded")
    if target >= model_mean(_ALPHA_MIN):
        raise FitError("spectrum is not decaying; alpha would be nonpositive")
    return brentq(lambda a: model_mean(a) - target, _ALPHA_MIN, _ALPHA_MAX,
                  xtol=1e-14, rtol=1e-13, maxiter=500)


def _level_variance(p, ells):
    levels = np.abs(ells) + 1.0
    return float(np.sum(p * levels ** 2) - np.sum(p * levels) ** 2)


def _fit_counts(ells, counts):
    n = counts.astype(float)
    total = n.sum()
    alpha = _match_mean_level(ells, n)
    p = _thermal_on(alpha, ells)
    # Curvature of the negative log-likelihood is N Var(|ell|).
    stderr = 1.0 / np.sqrt(total * _level_variance(p, ells))
    residual = float(np.sum((n - total * p) ** 2 / poisson_errors(counts) ** 2))
    return alpha, stderr, residual


def _fit_min_kl(ells, p):
    alpha = _match_mean_level(ells, p)
    model = _thermal_on(alpha, ells)
    # Quasi-likelihood: curvature Var(|ell|) scaled by the Pearson dispersion.
    dispersion = np.sum((p - model) ** 2 / model) / max(len(p) - 1, 1)
    stderr = float(np.sqrt(dispersion / _level_variance(model, ells)))
    return alpha, stderr, float(np.sum((p - model) ** 2))


def _fit_probabilities(ells, p, errors):
    w = np.ones_like(p) if errors is None else 1.0 / np.maximum(errors, 1e-300) ** 2

    def objective(log_alpha):
        return float(np.sum(w * (p - _thermal_on(np.exp(log_alpha), ells)) ** 2))

    grid = np.linspace(np.log(1e-4), np.log(60.0), 601)
    vals = np.array([objective(g) for g in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-13, "maxiter": 500})
    alpha = float(np.exp(res.x))
    model = _thermal_on(alpha, ells)
    levels = np.abs(ells) + 1.0
    jac = model * (np.sum(model * levels) - levels)
    info = float(np.sum(w * jac ** 2))
    rss = float(np.sum(w * (p - model) ** 2))
    if errors is None:
        dof = max(len(p) - 1, 1)
        stderr = np.sqrt(rss / dof / info) if info > 0 else np.inf
    else:
        stderr = 1.0 / np.sqrt(info) if info > 0 else np.inf
    return alpha, float(stderr), rss


def fit_thermal(spectrum: OamSpectrum, window: Optional[int] = DEFAULT_WINDOW,
                method: str = "auto") -> ThermalFit:
    """Fit the single-parameter thermal model to a measured spectrum.

    ``method="auto"`` picks the Poisson maximum likelihood for count data,
    error-weighted least squares for probabilities that carry errors, and
    the minimum-KL (pseudo-likelihood) fit for bare probabilities.  The
    model is renormalized over the same window as the data.
    """
    s = spectrum.windowed(window)
    if len(np.unique(np.abs(s.ells[s.p > 0]))) < 2 or len(np.unique(np.abs(s.ells))) < 3:
        raise FitError("need at least 3 distinct |ell| bins and support beyond one level")
    if method == "auto":
        if s.counts is not None:
            method = "poisson-mle"
        elif s.errors is not None:
            method = "least-squares"
        else:
            method = "min-kl"
    n_total = None
    if method == "poisson-mle":
        if s.counts is None:
            raise FitError("poisson-mle needs count data")
        alpha, stderr, residual = _fit_counts(s.ells, s.counts)
        n_total = int(s.counts.sum())
    elif method == "least-squares":
        alpha, stderr, residual = _fit_probabilities(s.ells, s.p, s.errors)
    elif method == "min-kl":
        alpha, stderr, residual = _fit_min_kl(s.ells, s.p)
    else:
        raise ParameterError(f"unknown fit method {method!r}")
    model = OamSpectrum(s.ells, _thermal_on(alpha, s.ells))
    return ThermalFit(
        alpha=float(alpha),
        Z=partition_function(alpha),
        stderr_alpha=float(stderr),
        residual=float(residual),
        kl_to_fit=kl_divergence(s, model, window=None),
        window=window,
        method=method,
        n_total=n_total,
    )
