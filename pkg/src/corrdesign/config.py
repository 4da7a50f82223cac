"""Scenario configuration files (JSON)."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .design import CriterionConfig, PsoConfig
from .kernel import GroupCovariance, TriangularKernel, kernel_from_spec
from .model import CompositeModel, ModelError, basis_from_spec, build_general, build_separate, build_shared

__all__ = ["ConfigError", "BandSettings", "ScenarioConfig", "load_config", "parse_config", "config_hash"]

DEFAULT_SEED = 20200101

_TOP_KEYS = {
    "name", "interval", "bases", "sigma", "kernel", "n", "criterion", "pso",
    "seed", "theta", "alpha", "design", "bands", "reference",
}


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class BandSettings:
    runs: int = 100
    mc_draws: int = 100_000
    grid_size: int = 500


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    interval: tuple[float, float]
    model: CompositeModel
    sigma: GroupCovariance
    kernel: TriangularKernel
    n: int = 4
    criterion: CriterionConfig = field(default_factory=CriterionConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)
    seed: int = DEFAULT_SEED
    theta: np.ndarray | None = None
    alpha: float = 0.05
    design: tuple[float, ...] | None = None
    bands: BandSettings = field(default_factory=BandSettings)
    reference: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def theta_or_default(self) -> np.ndarray:
        return self.theta if self.theta is not None else np.ones(self.model.p)

    def resolved(self) -> dict:
        """The configuration with every default filled in."""
        return {
            "name": self.name,
            "interval": list(self.interval),
            "bases": self.raw.get("bases"),
            "sigma": {"sigma1": self.sigma.sigma1, "sigma2": self.sigma.sigma2, "rho": self.sigma.rho},
            "kernel": self.raw.get("kernel", "brownian"),
            "n": self.n,
            "criterion": {
                "p_norm": "inf" if math.isinf(self.criterion.p_norm) else self.criterion.p_norm,
                "grid_size": self.criterion.grid_size,
                "refine": self.criterion.refine,
            },
            "pso": vars(self.pso).copy(),
            "seed": self.seed,
            "theta": self.theta_or_default.tolist(),
            "alpha": self.alpha,
            "design": list(self.design) if self.design is not None else None,
            "bands": vars(self.bands).copy(),
        }


def config_hash(raw: dict) -> str:
    blob = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _require(raw: dict, key: str, where: str = ""):
    if key not in raw:
        raise ConfigError(where + key, "missing required field")
    return raw[key]


def _check_keys(raw: dict, allowed: set, where: str) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(where.rstrip(".") or "config", "expected an object")
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(where + unknown[0], "unknown key")


def _number(value, name: str, *, integer: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return int(value) if integer else float(value)


def _basis(spec, name: str):
    if isinstance(spec, list):
        for i, item in enumerate(spec):
            try:
                basis_from_spec([item], name)
            except ModelError as exc:
                raise ConfigError(f"{name}[{i}]", str(exc)) from exc
    try:
        return basis_from_spec(spec, name.rsplit(".", 1)[-1])
    except ModelError as exc:
        raise ConfigError(name, str(exc)) from exc


def _build_model(raw: dict, interval) -> CompositeModel:
    bases = _require(raw, "bases")
    if not isinstance(bases, dict):
        raise ConfigError("bases", "expected an object")
    try:
        if "general" in bases:
            _check_keys(bases, {"general"}, "bases.")
            gen = bases["general"]
            _check_keys(gen, {"column1", "column2"}, "bases.general.")
            col1 = _basis(_require(gen, "column1", "bases.general."), "bases.general.column1")
            col2 = _basis(_require(gen, "column2", "bases.general."), "bases.general.column2")
            return build_general(col1, col2, interval)
        _check_keys(bases, {"group1", "group2", "shared"}, "bases.")
        f1 = _basis(_require(bases, "group1", "bases."), "bases.group1")
        f2 = _basis(_require(bases, "group2", "bases."), "bases.group2")
        if "shared" in bases:
            return build_shared(_basis(bases["shared"], "bases.shared"), f1, f2, interval)
        return build_separate(f1, f2, interval)
    except ModelError as exc:
        raise ConfigError("bases", str(exc)) from exc


def parse_config(raw: dict, name: str = "scenario") -> ScenarioConfig:
    _check_keys(raw, _TOP_KEYS, "")
    interval = _require(raw, "interval")
    if not isinstance(interval, list) or len(interval) != 2:
        raise ConfigError("interval", "expected [a, b]")
    interval = (_number(interval[0], "interval[0]"), _number(interval[1], "interval[1]"))
    if not 0 <= interval[0] < interval[1]:
        raise ConfigError("interval", "expected 0 <= a < b")
    model = _build_model(raw, interval)

    sig = raw.get("sigma", {})
    _check_keys(sig, {"sigma1", "sigma2", "rho"}, "sigma.")
    try:
        gc = GroupCovariance(
            _number(sig.get("sigma1", 1.0), "sigma.sigma1"),
            _number(sig.get("sigma2", 1.0), "sigma.sigma2"),
            _number(sig.get("rho", 0.0), "sigma.rho"),
        )
    except ModelError as exc:
        raise ConfigError("sigma", str(exc)) from exc

    try:
        kernel = kernel_from_spec(raw.get("kernel", "brownian"))
        kernel.validate(interval)
    except ModelError as exc:
        raise ConfigError("kernel", str(exc)) from exc

    n = _number(raw.get("n", 4), "n", integer=True)
    if n < 2:
        raise ConfigError("n", "must be at least 2")

    crit = raw.get("criterion", {})
    _check_keys(crit, {"p_norm", "grid_size", "refine"}, "criterion.")
    p_norm = crit.get("p_norm", "inf")
    p_norm = math.inf if p_norm in ("inf", "infinity") else _number(p_norm, "criterion.p_norm")
    refine = crit.get("refine", True)
    if not isinstance(refine, bool):
        raise ConfigError("criterion.refine", "expected true or false")
    try:
        criterion = CriterionConfig(p_norm, _number(crit.get("grid_size", 2000), "criterion.grid_size",
                                                    integer=True), refine)
    except ModelError as exc:
        raise ConfigError("criterion", str(exc)) from exc

    seed = _number(raw.get("seed", DEFAULT_SEED), "seed", integer=True)
    if seed < 0:
        raise ConfigError("seed", "must be nonnegative")

    pso_raw = raw.get("pso", {})
    _check_keys(pso_raw, {"swarm", "iters", "inertia", "c1", "c2", "seed", "restarts"}, "pso.")
    pso_args = {}
    for key in ("swarm", "iters", "restarts", "seed"):
        if key in pso_raw:
            pso_args[key] = _number(pso_raw[key], f"pso.{key}", integer=True)
    for key in ("inertia", "c1", "c2"):
        if key in pso_raw:
            pso_args[key] = _number(pso_raw[key], f"pso.{key}")
    pso_args.setdefault("seed", seed)
    try:
        pso = PsoConfig(**pso_args)
    except ModelError as exc:
        raise ConfigError("pso", str(exc)) from exc

    theta = raw.get("theta")
    if theta is not None:
        if not isinstance(theta, list) or len(theta) != model.p:
            raise ConfigError("theta", f"expected a list of {model.p} numbers")
        theta = np.array([_number(x, f"theta[{i}]") for i, x in enumerate(theta)])

    alpha = _number(raw.get("alpha", 0.05), "alpha")
    if not 0 < alpha < 1:
        raise ConfigError("alpha", "must be in (0, 1)")

    design = raw.get("design")
    if design is not None:
        if not isinstance(design, list) or len(design) < 2:
            raise ConfigError("design", "expected a list of at least two time points")
        design = tuple(_number(x, f"design[{i}]") for i, x in enumerate(design))
        if np.any(np.diff(design) <= 0) or design[0] != interval[0] or design[-1] != interval[1]:
            raise ConfigError("design", "points must increase strictly from a to b")

    bands_raw = raw.get("bands", {})
    _check_keys(bands_raw, {"runs", "mc_draws", "grid_size"}, "bands.")
    bands = BandSettings(**{k: _number(v, f"bands.{k}", integer=True) for k, v in bands_raw.items()})
    if bands.mc_draws < 1000 or bands.runs < 1 or bands.grid_size < 2:
        raise ConfigError("bands", "need runs >= 1, mc_draws >= 1000, grid_size >= 2")

    reference = raw.get("reference", {})
    if not isinstance(reference, dict):
        raise ConfigError("reference", "expected an object")

    return ScenarioConfig(
        name=str(raw.get("name", name)),
        interval=interval,
        model=model,
        sigma=gc,
        kernel=kernel,
        n=n,
        criterion=criterion,
        pso=pso,
        seed=seed,
        theta=theta,
        alpha=alpha,
        design=design,
        bands=bands,
        reference=reference,
        raw=raw,
    )


def load_config(path, seed_override: int | None = None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc.strerror}") from exc
    try:
        raw: Any = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path.name}:{exc.lineno}", exc.msg) from exc
    if seed_override is not None:
        raw = dict(raw, seed=seed_override)
        if isinstance(raw.get("pso"), dict):
            raw["pso"] = {k: v for k, v in raw["pso"].items() if k != "seed"}
    return parse_config(raw, name=path.stem)
