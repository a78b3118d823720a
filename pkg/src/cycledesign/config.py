"""Run configuration for the command line pipeline (one JSON document)."""

from __future__ import annotations

import hashlib
import importlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .fisher import DEFAULT_N
from .graph import DEFAULT_MAX_NODES, Alphabet
from .models import EXTERNAL, ExternalModel, ModelSpec
from .optimizer import DEFAULT_MAX_ITERATIONS, DEFAULT_TOLERANCE, Criterion
from .synth import CYCLE_FLOW, METHODS

INFO_METHODS = ("monte-carlo", "exact")

_KNOWN = {
    "alphabet",
    "memory",
    "model",
    "criterion",
    "N",
    "sequence_length",
    "seed",
    "output_dir",
    "cycle_cache",
    "info_method",
    "transition",
    "chain_burn_in",
    "tolerance",
    "max_iterations",
    "max_nodes",
    "workers",
}
_MODEL_KNOWN = {"kind", "theta0", "lambda_e", "burn_in", "evaluator"}


def _load_external(path: str) -> ExternalModel:
    mod, _, attr = path.partition(":")
    if not mod or not attr:
        raise ConfigError(f"evaluator must look like 'package.module:name', got {path!r}")
    try:
        obj = getattr(importlib.import_module(mod), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot import evaluator {path!r}: {exc}") from exc
    if not isinstance(obj, ExternalModel) and callable(obj):
        obj = obj()
    if not isinstance(obj, ExternalModel):
        raise ConfigError(f"{path!r} is not an ExternalModel")
    return obj


@dataclass(frozen=True)
class RunConfig:
    alphabet: Alphabet
    memory: int
    model: ModelSpec
    criterion: Criterion = Criterion.D
    N: int = DEFAULT_N
    sequence_length: int = DEFAULT_N
    seed: int = 0
    output_dir: Path = Path("out")
    cycle_cache: Path | None = None
    info_method: str = "monte-carlo"
    transition: str = CYCLE_FLOW
    chain_burn_in: int = 0
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    max_nodes: int = DEFAULT_MAX_NODES
    workers: int = 1
    digest: str = ""

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | None = None) -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(doc) - _KNOWN
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key in ("alphabet", "memory", "model"):
            if key not in doc:
                raise ConfigError(f"configuration is missing {key!r}")
        mdoc = doc["model"]
        if not isinstance(mdoc, dict) or "kind" not in mdoc or "theta0" not in mdoc:
            raise ConfigError("model needs at least 'kind' and 'theta0'")
        if set(mdoc) - _MODEL_KNOWN:
            raise ConfigError(f"unknown model keys: {sorted(set(mdoc) - _MODEL_KNOWN)}")
        external = _load_external(mdoc["evaluator"]) if mdoc["kind"] == EXTERNAL and "evaluator" in mdoc else None
        model = ModelSpec(
            kind=mdoc["kind"],
            theta0=tuple(mdoc["theta0"]),
            noise_variance=mdoc.get("lambda_e", 1.0),
            burn_in=mdoc.get("burn_in"),
            external=external,
        )
        base = Path(base_dir) if base_dir else Path(".")

        def _path(v):
            if v is None:
                return None
            p = Path(v)
            return p if p.is_absolute() else base / p

        def _int(key, default, minimum):
            v = doc.get(key, default)
            if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
                raise ConfigError(f"{key} must be an integer >= {minimum}, got {v!r}")
            return v

        info_method = doc.get("info_method", "monte-carlo")
        if info_method not in INFO_METHODS:
            raise ConfigError(f"info_method must be one of {INFO_METHODS}, got {info_method!r}")
        transition = doc.get("transition", CYCLE_FLOW)
        if transition not in METHODS:
            raise ConfigError(f"transition must be one of {METHODS}, got {transition!r}")
        tol = doc.get("tolerance", DEFAULT_TOLERANCE)
        if not isinstance(tol, (int, float)) or not tol > 0:
            raise ConfigError(f"tolerance must be positive, got {tol!r}")
        return cls(
            alphabet=Alphabet(doc["alphabet"]),
            memory=_int("memory", None, 1),
            model=model,
            criterion=Criterion.parse(doc.get("criterion", "D")),
            N=_int("N", DEFAULT_N, 1),
            sequence_length=_int("sequence_length", DEFAULT_N, 1),
            seed=_int("seed", 0, 0),
            output_dir=_path(doc.get("output_dir", "out")),
            cycle_cache=_path(doc.get("cycle_cache")),
            info_method=info_method,
            transition=transition,
            chain_burn_in=_int("chain_burn_in", 0, 0),
            tolerance=float(tol),
            max_iterations=_int("max_iterations", DEFAULT_MAX_ITERATIONS, 1),
            max_nodes=_int("max_nodes", DEFAULT_MAX_NODES, 1),
            workers=_int("workers", 1, 1),
            digest=config_digest(doc),
        )

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"configuration {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(doc, base_dir=path.parent)


def config_digest(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
