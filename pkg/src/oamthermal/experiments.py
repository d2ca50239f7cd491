"""Config-driven runs reproducing the spectrum, sweep and turbulence studies.

A config is a JSON object.  Every run writes its tables, one fit record per
fitted distribution and a ``manifest.json`` into the output directory.
Outputs depend only on the config, so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .analysis import DEFAULT_WINDOW, OamSpectrum, fit_thermal, mean_energy
from .detection import (DEFAULT_IDLER_WAIST, DetectorConfig, coherent_thermal_state,
                        heralded_spectrum, sample_counts)
from .errors import ConfigError, ParameterError
from .lg_modes import GridSpec, default_grid
from .source import (DEFAULT_L_MAX, joint_amplitudes_overlap, joint_amplitudes_thermal,
                     overlap_model_alpha, reduced_spectrum)
from .tables import write_fit, write_spectrum, write_table
from .turbulence import (WEAK_STRENGTH, TurbulenceParams, crosstalk_matrix,
                         ensemble_average, generate_phase_screen, propagate_coherent,
                         propagate_incoherent)

EXPERIMENTS = ("spectrum", "pump-sweep", "aperture-sweep", "turbulence",
               "coherent-turbulence", "ensemble")
DEFAULT_COUNTS = 1e5


def load_config(path) -> Dict[str, Any]:
    try:
        config = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_config(config)
    return config


def validate_config(config: Dict[str, Any]):
    if not isinstance(config, dict):
        raise ConfigError("config must be a JSON object")
    kind = config.get("experiment")
    if kind not in EXPERIMENTS:
        raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {kind!r}")
    if not isinstance(config.get("seed"), int):
        raise ConfigError("an integer 'seed' is mandatory")
    required = {
        "spectrum": ["source"],
        "pump-sweep": ["collection_waist", "pump_waists"],
        "aperture-sweep": ["source", "diameters"],
        "turbulence": ["input", "turbulence"],
        "coherent-turbulence": ["input", "turbulence"],
        "ensemble": ["input", "turbulence"],
    }[kind]
    for key in required:
        if key not in config:
            raise ConfigError(f"{kind} config needs '{key}'")


def config_hash(config: Dict[str, Any]) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _get(section: Dict[str, Any], key: str, kind=float, default=None, required=False):
    if key not in section or section[key] is None:
        if required:
            raise ConfigError(f"missing '{key}'")
        return default
    try:
        return kind(section[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for '{key}': {section[key]!r}") from exc


class _Run:
    """Collects the files of one run and writes the manifest."""

    def __init__(self, config: Dict[str, Any], out_dir):
        self.config = config
        self.out = Path(out_dir)
        self.hash = config_hash(config)
        self.window = _get(config, "window", int, DEFAULT_WINDOW)
        self.files: List[str] = []
        self.results: Dict[str, Any] = {}

    def meta(self, **extra) -> Dict[str, object]:
        base = {"experiment": self.config["experiment"], "config_hash": self.hash,
                "seed": self.config["seed"], "window": self.window}
        base.update(extra)
        return base

    def spectrum(self, name: str, spectrum: OamSpectrum, **extra):
        write_spectrum(self.out / f"{name}.csv", spectrum, self.meta(table=name, **extra))
        self.files.append(f"{name}.csv")

    def fit(self, name: str, spectrum: OamSpectrum, **extra):
        fit = fit_thermal(spectrum, self.window)
        write_fit(self.out / f"{name}_fit.csv", fit, self.meta(table=f"{name}_fit", **extra))
        self.files.append(f"{name}_fit.csv")
        return fit

    def table(self, name: str, columns, **extra):
        write_table(self.out / f"{name}.csv", columns, self.meta(table=name, **extra))
        self.files.append(f"{name}.csv")

    def finish(self) -> Path:
        digests = {}
        for name in self.files:
            digests[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()
        manifest = {
            "package_version": __version__,
            "experiment": self.config["experiment"],
            "config_hash": self.hash,
            "seed": self.config["seed"],
            "window": self.window,
            "config": self.config,
            "files": digests,
            "results": self.results,
        }
        path = self.out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return path


def _source(section: Dict[str, Any]):
    kind = section.get("kind", "thermal")
    l_max = _get(section, "l_max", int, DEFAULT_L_MAX)
    if kind == "thermal":
        return joint_amplitudes_thermal(_get(section, "alpha", required=True), l_max)
    if kind == "overlap":
        wc = _get(section, "collection_waist", required=True)
        samples = _get(section, "grid_samples", int, 512)
        return joint_amplitudes_overlap(_get(section, "pump_waist", required=True), wc, l_max,
                                        default_grid(wc, l_max, samples))
    raise ConfigError(f"unknown source kind {kind!r}")


def _measure(run: _Run, spectrum: OamSpectrum, seed: int) -> OamSpectrum:
    """Apply the count budget; ``counts: null`` keeps the noiseless spectrum."""
    budget = run.config.get("counts", DEFAULT_COUNTS)
    if budget is None:
        return spectrum
    counts = sample_counts(spectrum, float(budget), seed)
    return OamSpectrum.from_counts(spectrum.ells, counts)


def _summary(spectrum: OamSpectrum, fit, window) -> Dict[str, float]:
    return {"alpha": fit.alpha, "stderr_alpha": fit.stderr_alpha,
            "mean_energy": mean_energy(spectrum, window), "kl_to_fit": fit.kl_to_fit}


def run_spectrum(config: Dict[str, Any], out_dir) -> Path:
    """Heralded signal spectrum with optional Poisson counts and a thermal fit."""
    run = _Run(config, out_dir)
    j = _source(config["source"])
    det = _detector(config.get("detector", {"kind": "bucket"}))
    waist = _get(config, "idler_waist", float, DEFAULT_IDLER_WAIST)
    ideal = heralded_spectrum(j, det, waist)
    measured = _measure(run, ideal, config["seed"])
    run.spectrum("ideal", ideal)
    run.spectrum("measured", measured)
    fit = run.fit("measured", measured)
    run.results["measured"] = _summary(measured, fit, run.window)
    return run.finish()


def _detector(section: Dict[str, Any]) -> DetectorConfig:
    kind = section.get("kind", "bucket")
    if kind == "bucket":
        return DetectorConfig.bucket()
    if kind == "aperture":
        try:
            return DetectorConfig.aperture(_get(section, "diameter", required=True))
        except ParameterError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unsupported detector kind {kind!r}")


def run_pump_sweep(config: Dict[str, Any], out_dir) -> Path:
    """Fitted alpha and mean energy versus pump waist (overlap-model source)."""
    run = _Run(config, out_dir)
    wc = _get(config, "collection_waist", required=True)
    l_max = _get(config, "l_max", int, DEFAULT_L_MAX)
    grid = default_grid(wc, l_max, _get(config, "grid_samples", int, 512))
    waists = [float(w) for w in config["pump_waists"]]
    rows = {"pump_waist": [], "alpha": [], "stderr_alpha": [], "mean_energy": [],
            "kl_to_fit": [], "model_alpha": [], "decay_residual": []}
    for i, wp in enumerate(waists):
        j = joint_amplitudes_overlap(wp, wc, l_max, grid)
        spec = _measure(run, reduced_spectrum(j), config["seed"] + i)
        name = f"pump_{i:02d}"
        run.spectrum(name, spec, pump_waist=wp)
        fit = run.fit(name, spec, pump_waist=wp)
        for key, val in (("pump_waist", wp), ("alpha", fit.alpha),
                         ("stderr_alpha", fit.stderr_alpha),
                         ("mean_energy", mean_energy(spec, run.window)),
                         ("kl_to_fit", fit.kl_to_fit),
                         ("model_alpha", overlap_model_alpha(wp, wc)),
                         ("decay_residual", j.decay_residual)):
            rows[key].append(val)
    run.table("sweep", rows, collection_waist=wc)
    run.results["sweep"] = rows
    return run.finish()


def run_aperture_sweep(config: Dict[str, Any], out_dir) -> Path:
    """Fitted alpha, energy and KL versus idler iris diameter (null = open)."""
    run = _Run(config, out_dir)
    j = _source(config["source"])
    waist = _get(config, "idler_waist", float, DEFAULT_IDLER_WAIST)
    grid = default_grid(waist, j.l_max, _get(config, "grid_samples", int, 512))
    rows = {"diameter": [], "alpha": [], "stderr_alpha": [], "mean_energy": [], "kl_to_fit": []}
    for i, d in enumerate(config["diameters"]):
        det = DetectorConfig.bucket() if d is None else _detector({"kind": "aperture", "diameter": d})
        spec = _measure(run, heralded_spectrum(j, det, waist, grid), config["seed"] + i)
        label = "open" if d is None else float(d)
        name = f"aperture_{i:02d}"
        run.spectrum(name, spec, diameter=label)
        fit = run.fit(name, spec, diameter=label)
        for key, val in (("diameter", label), ("alpha", fit.alpha),
                         ("stderr_alpha", fit.stderr_alpha),
                         ("mean_energy", mean_energy(spec, run.window)),
                         ("kl_to_fit", fit.kl_to_fit)):
            rows[key].append(val)
    run.table("sweep", rows, idler_waist=waist)
    run.results["sweep"] = rows
    return run.finish()


def _turbulence_params(config) -> tuple:
    sec = config["turbulence"]
    waist = _get(sec, "waist", float, 1e-3)
    l_max = _get(config["input"], "l_max", int, DEFAULT_L_MAX)
    grid: GridSpec = default_grid(waist, l_max, _get(sec, "grid_samples", int, 256))
    strength = _get(sec, "strength", float, WEAK_STRENGTH)
    try:
        params = TurbulenceParams.from_strength(strength, waist, grid, config["seed"],
                                                bool(sec.get("subharmonics", True)))
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc
    return params, waist, l_max


def run_turbulence(config: Dict[str, Any], out_dir) -> Path:
    """Before/after spectra and fits for thermal or coherent-thermal inputs.

    ``turbulence`` and ``coherent-turbulence`` apply one screen per seed
    (``seed .. seed + n_screens - 1``); ``ensemble`` averages the coherent
    output over ``n_masks`` screens.
    """
    run = _Run(config, out_dir)
    kind = config["experiment"]
    params, waist, l_max = _turbulence_params(config)
    alpha = _get(config["input"], "alpha", required=True)
    coherent = kind in ("coherent-turbulence", "ensemble") or config["input"].get("kind") == "coherent"
    state = coherent_thermal_state(alpha, l_max) if coherent else None
    before = state.populations() if coherent else reduced_spectrum(joint_amplitudes_thermal(alpha, l_max))
    seed = config["seed"]

    measured_before = _measure(run, before, seed)
    run.spectrum("before", measured_before)
    fit_before = run.fit("before", measured_before)
    run.results["before"] = _summary(measured_before, fit_before, run.window)

    if kind == "ensemble":
        n_masks = _get(config, "n_masks", int, 10)
        after = ensemble_average(state, params, n_masks, waist)
        measured = _measure(run, after, seed + 1)
        run.spectrum("after", measured, n_masks=n_masks)
        fit = run.fit("after", measured, n_masks=n_masks)
        run.results["after"] = _summary(measured, fit, run.window)
        return run.finish()

    n_screens = _get(config, "n_screens", int, 1)
    rows = {"screen_seed": [], "alpha": [], "stderr_alpha": [], "mean_energy": [],
            "kl_to_fit": [], "tv_from_input": []}
    for i in range(n_screens):
        s = seed + i
        matrix = crosstalk_matrix(generate_phase_screen(params.with_seed(s)), waist, l_max)
        out = propagate_coherent(state, matrix) if coherent else propagate_incoherent(before, matrix)
        measured = _measure(run, out, seed + 1 + i)
        name = f"after_{i:02d}"
        run.spectrum(name, measured, screen_seed=s)
        fit = run.fit(name, measured, screen_seed=s)
        for key, val in (("screen_seed", s), ("alpha", fit.alpha),
                         ("stderr_alpha", fit.stderr_alpha),
                         ("mean_energy", mean_energy(measured, run.window)),
                         ("kl_to_fit", fit.kl_to_fit),
                         ("tv_from_input", out.total_variation(before))):
            rows[key].append(val)
    run.table("screens", rows, strength=config["turbulence"].get("strength", WEAK_STRENGTH))
    run.results["screens"] = rows
    run.results["median_alpha"] = float(np.median(rows["alpha"]))
    run.results["median_kl_to_fit"] = float(np.median(rows["kl_to_fit"]))
    return run.finish()


RUNNERS = {
    "spectrum": run_spectrum,
    "pump-sweep": run_pump_sweep,
    "aperture-sweep": run_aperture_sweep,
    "turbulence": run_turbulence,
    "coherent-turbulence": run_turbulence,
    "ensemble": run_turbulence,
}


def run_config(config: Dict[str, Any], out_dir: Optional[str] = None) -> Path:
    validate_config(config)
    out = out_dir or config.get("output_dir")
    if not out:
        raise ConfigError("no output directory given (config 'output_dir' or --out)")
    return RUNNERS[config["experiment"]](config, out)
