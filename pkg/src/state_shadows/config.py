"""Experiment configuration: JSON specs for states, ensembles and observables."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import states as st
from .errors import ConfigError, DimMismatchError
from .moments import (
    BinaryPhaseEnsemble,
    Ensemble,
    FiniteEnsemble,
    HaarEnsemble,
    MixtureEnsemble,
    PointEnsemble,
    RealHaarEnsemble,
    StabilizerEnsemble,
)
from .observables import Observable, observable_from_json
from .rng import make_rng

ENSEMBLES = {
    "haar": HaarEnsemble,
    "stabilizer": StabilizerEnsemble,
    "binary_phase": BinaryPhaseEnsemble,
    "real_haar": RealHaarEnsemble,
}


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(data: Any) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


def _load_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc


def build_state(spec, n: int, base: Path) -> st.PureState:
    """Pure state from a label string (``"0+i"``), ``{"re", "im"}`` or ``{"file": ...}``."""
    if isinstance(spec, str):
        state = st.product_state(spec)
    elif isinstance(spec, dict) and "file" in spec:
        state = st.PureState.from_json(_load_json(base / spec["file"]))
    elif isinstance(spec, dict) and "re" in spec:
        state = st.PureState.from_json(spec)
    elif isinstance(spec, dict) and "haar" in spec:
        state = st.haar_sample(n, make_rng(int(spec["haar"])))
    else:
        raise ConfigError(f"cannot build a state from {spec!r}")
    if state.n != n:
        raise DimMismatchError(f"state spec {spec!r} has {state.n} qubits, expected {n}")
    return state


def build_rho(spec, n: int, base: Path) -> st.DensityMatrix:
    """Input state: ``{"named": "0+"}``, ``{"pure": {...}}``, ``{"file": path}``,
    ``{"random": {"seed": s, "rank": r}}`` or ``{"maximally_mixed": true}``."""
    if isinstance(spec, str):
        return st.product_state(spec).density() if len(st._split_labels(spec)) == n else _bad_n(spec, n)
    if not isinstance(spec, dict):
        raise ConfigError(f"cannot build an input state from {spec!r}")
    if "named" in spec:
        return build_state(spec["named"], n, base).density()
    if "pure" in spec:
        return build_state(spec["pure"], n, base).density()
    if "file" in spec:
        data = _load_json(base / spec["file"])
        rho = st.DensityMatrix.from_json(data) if np.ndim(data["re"]) == 2 else st.PureState.from_json(data).density()
        if rho.n != n:
            raise DimMismatchError(f"input state file has {rho.n} qubits, expected {n}")
        return rho
    if "random" in spec:
        opts = spec["random"] or {}
        return st.random_density(n, make_rng(opts.get("seed")), opts.get("rank"))
    if spec.get("maximally_mixed"):
        return st.DensityMatrix.maximally_mixed(n)
    raise ConfigError(f"cannot build an input state from {spec!r}")


def _bad_n(spec, n):
    raise DimMismatchError(f"state label {spec!r} does not describe {n} qubits")


def build_ensemble(spec, n: int, base: Path) -> Ensemble:
    """``{"name": haar|stabilizer|binary_phase|real_haar}``,
    ``{"name": "mixture", "eps": e, "base": ..., "psi": ...}``,
    ``{"name": "finite", "states": [...], "weights": [...]}`` or ``{"name": "point", "state": ...}``."""
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict) or "name" not in spec:
        raise ConfigError(f"ensemble spec needs a name: {spec!r}")
    name = spec["name"]
    if name in ENSEMBLES:
        return ENSEMBLES[name](n)
    if name == "mixture":
        inner = build_ensemble(spec.get("base", "haar"), n, base)
        psi = build_state(spec["psi"], n, base) if "psi" in spec else st.PureState.basis(n, 0)
        try:
            return MixtureEnsemble(inner, psi, float(spec["eps"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad mixture spec {spec!r}: {exc}") from exc
    if name == "finite":
        vecs = [build_state(s, n, base).amplitudes for s in spec["states"]]
        return FiniteEnsemble(np.asarray(vecs), spec.get("weights"))
    if name == "point":
        return PointEnsemble(build_state(spec["state"], n, base))
    raise ConfigError(f"unknown ensemble {name!r}")


def build_observable(spec, n: int, base: Path) -> Observable:
    if isinstance(spec, str):
        spec = {"n": n, "kind": "pauli", "payload": spec}
    if isinstance(spec, dict) and "file" in spec:
        spec = _load_json(base / spec["file"])
    spec = dict(spec)
    spec.setdefault("n", n)
    obs = observable_from_json(spec)
    if obs.n != n:
        raise DimMismatchError(f"observable acts on {obs.n} qubits, expected {n}")
    return obs


@dataclass
class ExperimentConfig:
    n: int
    ensemble: dict | str
    rho: dict | str
    observable: dict | str
    gamma: float = 0.1
    delta: float = 0.05
    bound_kind: str = "exact"
    epsilon: float | str = 0.0
    seed: int | None = 0
    shots: int | None = None
    output: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    base_dir: Path = field(default=Path("."), repr=False)
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path = Path(".")) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        missing = [k for k in ("n", "ensemble", "rho", "observable") if k not in data]
        if missing:
            raise ConfigError(f"configuration is missing {missing}")
        known = {k for k in cls.__dataclass_fields__} - {"base_dir", "raw"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        try:
            cfg = cls(**{k: data[k] for k in data}, base_dir=base_dir, raw=data)
            cfg.n = int(cfg.n)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.n < 1:
            raise ConfigError("n must be >= 1")
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(_load_json(path), path.parent)

    @property
    def hash(self) -> str:
        return config_hash(self.raw)

    def build(self) -> tuple[st.DensityMatrix, Ensemble, Observable]:
        try:
            return (
                build_rho(self.rho, self.n, self.base_dir),
                build_ensemble(self.ensemble, self.n, self.base_dir),
                build_observable(self.observable, self.n, self.base_dir),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed configuration: {exc}") from exc
