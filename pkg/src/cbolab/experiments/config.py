"""Experiment configuration: YAML loading, strict validation, overrides.

Configs are plain YAML mappings.  Unknown keys are rejected (they are almost
always typos), required keys depend on the experiment kind, and every value
is range-checked before anything random happens.  The normalized mapping is
echoed into every output file so a run can be reproduced bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import yaml

from ..dynamics import CboParams, NoiseKind
from ..errors import ConfigurationError
from ..laws import InitialLaw
from ..objectives import Objective, make_builtin

KINDS = (
    "constants",
    "simulate",
    "optimize",
    "moments",
    "mfl",
    "stability",
    "concentration",
    "wm-mc",
)

_TOP_KEYS = {
    "kind",
    "seed",
    "out_dir",
    "objective",
    "initial_law",
    "initial_law_b",
    "params",
    "particles",
    "j_ladder",
    "oversample",
    "replicates",
    "stride",
    "fit_window",
    "q",
    "kappa",
    "threshold_a",
    "baseline",
    "reference_size",
    "allow_supercritical",
}
_OBJECTIVE_KEYS = {"name", "dimension", "minimizer", "scale"}
_LAW_KEYS = {"name", "location", "scale"}
_PARAMS_KEYS = {"alpha", "sigma", "noise", "dt", "horizon"}

_LADDER_KINDS = {"mfl", "stability", "concentration", "wm-mc"}
_SINGLE_KINDS = {"simulate", "optimize", "moments"}


def _check_keys(mapping: dict, allowed: set, context: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigurationError(
            f"unknown {context} key(s): {', '.join(sorted(map(str, unknown)))}"
        )


@dataclass
class ExperimentConfig:
    """A validated experiment description plus the raw mapping it came from."""

    kind: str
    seed: int
    objective: dict
    initial_law: dict
    params: dict
    initial_law_b: Optional[dict] = None
    out_dir: Optional[str] = None
    particles: Optional[int] = None
    j_ladder: Optional[List[int]] = None
    oversample: int = 16
    replicates: int = 64
    stride: int = 10
    fit_window: float = 0.6
    q: float = 2.0
    kappa: Optional[float] = None
    threshold_a: float = 1.0
    baseline: str = "law"
    reference_size: Optional[int] = None
    allow_supercritical: bool = False
    echo: dict = field(default_factory=dict)

    # -- builders ----------------------------------------------------------

    def build_objective(self) -> Objective:
        spec = self.objective
        kwargs = {}
        if spec.get("minimizer") is not None:
            kwargs["minimizer"] = spec["minimizer"]
        if spec.get("scale") is not None:
            kwargs["scale"] = float(spec["scale"])
        return make_builtin(spec["name"], int(spec["dimension"]), **kwargs)

    def _build_law(self, spec: dict) -> InitialLaw:
        dimension = int(self.objective["dimension"])
        location = spec.get("location", 0.0)
        if np.isscalar(location):
            location = np.full(dimension, float(location))
        return InitialLaw(spec["name"], location, float(spec.get("scale", 1.0)))

    def build_law(self) -> InitialLaw:
        return self._build_law(self.initial_law)

    def build_law_b(self) -> InitialLaw:
        if self.initial_law_b is None:
            raise ConfigurationError(f"experiment kind {self.kind!r} needs initial_law_b")
        return self._build_law(self.initial_law_b)

    def build_params(self) -> CboParams:
        p = self.params
        return CboParams(
            alpha=float(p["alpha"]),
            sigma=float(p["sigma"]),
            noise=NoiseKind(p["noise"]),
            dt=float(p["dt"]),
            horizon=float(p["horizon"]),
        )

    def max_j(self) -> int:
        if self.j_ladder:
            return max(self.j_ladder)
        if self.particles:
            return self.particles
        raise ConfigurationError("no particle count configured")


def _validate(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a mapping")
    _check_keys(raw, _TOP_KEYS, "config")

    kind = raw.get("kind")
    if kind not in KINDS:
        raise ConfigurationError(
            f"kind must be one of {', '.join(KINDS)}; got {kind!r}"
        )
    for key in ("objective", "initial_law", "params"):
        if key not in raw or not isinstance(raw[key], dict):
            raise ConfigurationError(f"config needs a {key!r} mapping")
    _check_keys(raw["objective"], _OBJECTIVE_KEYS, "objective")
    _check_keys(raw["initial_law"], _LAW_KEYS, "initial_law")
    _check_keys(raw["params"], _PARAMS_KEYS, "params")
    if raw.get("initial_law_b") is not None:
        _check_keys(raw["initial_law_b"], _LAW_KEYS, "initial_law_b")
    for key in ("name", "dimension"):
        if key not in raw["objective"]:
            raise ConfigurationError(f"objective needs the {key!r} key")
    for key in _PARAMS_KEYS:
        if key not in raw["params"]:
            raise ConfigurationError(f"params needs the {key!r} key")
    if "seed" not in raw:
        raise ConfigurationError("config needs a seed (it is fixed before any sampling)")

    cfg = ExperimentConfig(
        kind=kind,
        seed=int(raw["seed"]),
        objective=dict(raw["objective"]),
        initial_law=dict(raw["initial_law"]),
        params=dict(raw["params"]),
        initial_law_b=dict(raw["initial_law_b"]) if raw.get("initial_law_b") else None,
        out_dir=raw.get("out_dir"),
        particles=int(raw["particles"]) if raw.get("particles") is not None else None,
        j_ladder=[int(j) for j in raw["j_ladder"]] if raw.get("j_ladder") else None,
        oversample=int(raw.get("oversample", 16)),
        replicates=int(raw.get("replicates", 64)),
        stride=int(raw.get("stride", 10)),
        fit_window=float(raw.get("fit_window", 0.6)),
        q=float(raw.get("q", 2.0)),
        kappa=float(raw["kappa"]) if raw.get("kappa") is not None else None,
        threshold_a=float(raw.get("threshold_a", 1.0)),
        baseline=str(raw.get("baseline", "law")),
        reference_size=(
            int(raw["reference_size"]) if raw.get("reference_size") is not None else None
        ),
        allow_supercritical=bool(raw.get("allow_supercritical", False)),
        echo=raw,
    )

    if cfg.replicates < 1:
        raise ConfigurationError(f"replicates must be >= 1, got {cfg.replicates}")
    if cfg.stride < 1:
        raise ConfigurationError(f"stride must be >= 1, got {cfg.stride}")
    if not 0.0 < cfg.fit_window <= 1.0:
        raise ConfigurationError(f"fit_window must lie in (0, 1], got {cfg.fit_window}")
    if cfg.baseline not in ("law", "expected", "empirical"):
        raise ConfigurationError(
            f"baseline must be law, expected or empirical; got {cfg.baseline!r}"
        )
    if kind in _LADDER_KINDS:
        if not cfg.j_ladder:
            raise ConfigurationError(f"experiment kind {kind!r} needs a j_ladder")
        if any(b <= a for a, b in zip(cfg.j_ladder, cfg.j_ladder[1:])):
            raise ConfigurationError("j_ladder must be strictly increasing")
    if kind in _SINGLE_KINDS and not cfg.particles:
        raise ConfigurationError(f"experiment kind {kind!r} needs a particles count")
    if kind == "stability" and cfg.initial_law_b is None:
        raise ConfigurationError("stability experiments need initial_law_b")
    if kind == "mfl" and cfg.oversample < 1:
        raise ConfigurationError(f"oversample must be >= 1, got {cfg.oversample}")
    if kind == "wm-mc":
        n = cfg.reference_size or 100 * cfg.max_j()
        if n < 100 * cfg.max_j():
            raise ConfigurationError(
                f"reference_size must be at least 100*max(j_ladder) = {100 * cfg.max_j()}"
            )
    # fail early on bad numeric parameters
    cfg.build_objective()
    cfg.build_law()
    cfg.build_params()
    if kind == "stability":
        cfg.build_law_b()
    return cfg


def apply_overrides(raw: dict, overrides: Sequence[str]) -> dict:
    """Apply dotted ``key=value`` overrides in place; values parse as YAML."""
    for item in overrides:
        if "=" not in item:
            raise ConfigurationError(f"override {item!r} is not of the form key=value")
        path, _, text = item.partition("=")
        value = yaml.safe_load(text)
        node = raw
        parts = path.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return raw


def load_config(
    path,
    overrides: Sequence[str] = (),
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    kind: Optional[str] = None,
    allow_supercritical: Optional[bool] = None,
) -> ExperimentConfig:
    """Load, override and validate a config file."""
    raw = yaml.safe_load(Path(path).read_text())
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigurationError("config must be a YAML mapping")
    apply_overrides(raw, overrides)
    if seed is not None:
        raw["seed"] = seed
    if out_dir is not None:
        raw["out_dir"] = out_dir
    if allow_supercritical:
        raw["allow_supercritical"] = True
    if kind is not None:
        if raw.get("kind") not in (None, kind):
            raise ConfigurationError(
                f"config kind {raw.get('kind')!r} conflicts with the {kind!r} subcommand"
            )
        raw["kind"] = kind
    return _validate(raw)


def config_from_mapping(raw: dict) -> ExperimentConfig:
    """Validate an in-memory mapping (used by tests and the library API)."""
    return _validate(raw)
