"""Run-configuration schema, defaults resolution, and total validation.

A run configuration is a single JSON document with four blocks (model,
noise, integrator, experiment) plus a seed and an output directory.  Every
default the loader applies is materialized into the resolved dictionary, so
the manifest written next to the results reproduces the run byte for byte.

Validation is total: every violated constraint across all blocks is
collected and reported together, not just the first one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import levy, shell
from .errors import ConfigError, ParameterError
from .integrator import SdePathConfig

__all__ = ["RunConfig", "load_config", "config_from_dict", "resolved_dict",
           "EXPERIMENTS", "initial_state"]

EXPERIMENTS = ("simulate", "bel-check", "ergodicity", "noise-check", "refine")

MODEL_DEFAULTS = {"model": "sabra", "n": 32, "kappa": 1.0, "a": 1.0,
                  "b": -0.5, "k0": 1.0, "lam": 2.0, "theta": 0.3}
NOISE_DEFAULTS = {"family": "variance_gamma", "sigma": 1.0, "theta_vg": 0.0,
                  "vartheta": 1.0, "delta_cut": 1e-3}
INTEGRATOR_DEFAULTS = {"dt": 1.0 / 128.0, "T": 1.0, "scheme": "semi_implicit",
                       "R": None, "noise_scale": 1.0}


@dataclass
class RunConfig:
    model: shell.ModelParams
    noise: levy.LevyMeasureSpec
    delta_cut: float
    integrator: SdePathConfig
    experiment: dict
    seed: int
    output_dir: str
    workers: int
    resolved: dict          # the fully-defaulted raw document
    warnings: list


def _merge(defaults: dict, given: dict, block: str, problems: list) -> dict:
    out = dict(defaults)
    for key, val in (given or {}).items():
        if key not in defaults and not (block == "noise"):
            problems.append(f"{block}: unknown field {key!r}")
        out[key] = val
    return out


def _build_noise(noise: dict, problems: list):
    family = noise.get("family", "variance_gamma")
    try:
        if family == "variance_gamma":
            spec = levy.LevyMeasureSpec.variance_gamma(
                noise.get("sigma", 1.0), noise.get("theta_vg", 0.0),
                noise.get("vartheta", 1.0))
        elif family == "tempered_stable":
            spec = levy.LevyMeasureSpec.tempered_stable(
                noise.get("c_plus", 1.0), noise.get("c_minus", 1.0),
                noise.get("beta_plus", 1.0), noise.get("beta_minus", 1.0),
                noise.get("alpha", 0.5))
        else:
            problems.append(f"noise: unknown family {family!r}")
            return None
    except ParameterError as exc:
        problems.append(f"noise: {exc}")
        return None
    return spec


def _check_noise_invariants(spec: levy.LevyMeasureSpec, problems: list):
    """Numerical checks of the structural measure conditions."""
    tail = [abs(z) ** 2 * levy.density(spec, z)
            for z in (1e2, 1e3, 1e4) if levy.density(spec, z) >= 0]
    neg = [abs(z) ** 2 * levy.density(spec, -z) for z in (1e2, 1e3, 1e4)]
    if not all(a >= b for a, b in zip(tail, tail[1:])) or \
       not all(a >= b for a, b in zip(neg, neg[1:])):
        problems.append("noise: z^2 g(z) fails to decrease along |z| = 1e2, 1e3, 1e4")
    for q in (1.0, 2.0, 3.0, 4.0):
        try:
            m = levy.moment(spec, q)
        except ParameterError as exc:
            problems.append(f"noise: moment q={q} failed: {exc}")
            continue
        if not np.isfinite(m):
            problems.append(f"noise: moment q={q} is not finite")


def config_from_dict(doc: dict) -> RunConfig:
    problems: list = []
    model_doc = _merge(MODEL_DEFAULTS, doc.get("model"), "model", problems)
    noise_doc = dict(NOISE_DEFAULTS)
    noise_doc.update(doc.get("noise") or {})
    integ_doc = _merge(INTEGRATOR_DEFAULTS, doc.get("integrator"),
                       "integrator", problems)
    exp_doc = dict(doc.get("experiment") or {})
    seed = int(doc.get("seed", 0))
    output_dir = str(doc.get("output_dir", "out"))
    workers = int(doc.get("workers", 1))
    if workers < 1:
        problems.append(f"workers={workers} must be at least 1")

    model = None
    try:
        model = shell.ModelParams(
            kappa=float(model_doc["kappa"]), a=float(model_doc["a"]),
            b=float(model_doc["b"]), k0=float(model_doc["k0"]),
            lam=float(model_doc["lam"]), theta=float(model_doc["theta"]),
            n=int(model_doc["n"]), model=str(model_doc["model"]))
    except ParameterError as exc:
        problems.extend(f"model: {part}" for part in str(exc).split("; "))

    spec = _build_noise(noise_doc, problems)
    if spec is not None:
        _check_noise_invariants(spec, problems)
    delta_cut = float(noise_doc.get("delta_cut", 1e-3))

    integ = None
    try:
        integ = SdePathConfig(
            dt=float(integ_doc["dt"]), T=float(integ_doc["T"]),
            delta_cut=delta_cut, seed=seed,
            R=None if integ_doc["R"] is None else float(integ_doc["R"]),
            scheme=str(integ_doc["scheme"]),
            noise_scale=float(integ_doc["noise_scale"]))
    except ParameterError as exc:
        problems.extend(f"integrator: {part}" for part in str(exc).split("; "))

    name = exp_doc.get("name")
    if name not in EXPERIMENTS:
        problems.append(f"experiment: name={name!r} not one of {EXPERIMENTS}")

    if problems:
        raise ConfigError(problems)

    warnings = integ.warnings(model)
    resolved = {
        "seed": seed, "output_dir": output_dir, "workers": workers,
        "model": model_doc,
        "noise": {**spec.as_dict(), "delta_cut": delta_cut},
        "integrator": {**integ_doc, "R": integ.R},
        "experiment": exp_doc,
        "rng": {"bit_generator": "Philox",
                "stream_derivation": "SeedSequence([seed, stream_id])"},
        "warnings": warnings,
    }
    return RunConfig(model, spec, delta_cut, integ, exp_doc, seed,
                     output_dir, workers, resolved, warnings)


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config file is not valid JSON: {exc}"])
    if not isinstance(doc, dict):
        raise ConfigError(["config document must be a JSON object"])
    return config_from_dict(doc)


def resolved_dict(cfg: RunConfig) -> dict:
    return cfg.resolved


def initial_state(model: shell.ModelParams, spec: dict | None) -> np.ndarray:
    """Build an initial shell state from its config description.

    kinds: zero (default); basis {shell, amplitude, im}; flat {values}.
    """
    spec = spec or {"kind": "zero"}
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return shell.ShellState.zero(model.n).values
    if kind == "basis":
        return shell.ShellState.basis(
            model.n, int(spec.get("shell", 1)),
            im=bool(spec.get("im", False)),
            amplitude=float(spec.get("amplitude", 1.0))).values
    if kind == "flat":
        return shell.ShellState.from_flat(
            np.asarray(spec["values"], dtype=float)).values
    raise ConfigError([f"initial state: unknown kind {kind!r}"])
