"""Command line front end.

    cycledesign enumerate-cycles --config F [--out D]
    cycledesign design --config F --out D
    cycledesign synthesize --config F --design D --length N --seed S --out F2
    cycledesign evaluate --config F --signal F2 --out D

Every command writes a ``manifest.json`` next to its artifacts.  Artifacts
carry no timestamps, so identical configs and seeds give identical bytes.
Exit codes: 0 ok, 2 configuration, 3 resource cap, 4 numerical, 5 not converged.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .errors import ConfigError, InputDesignError, NotConvergedError
from .fisher import (
    InfoMatrix,
    cycle_info_matrix,
    exact_cycle_info_matrix,
    matrices_to_dict,
    sampled_info_matrix,
)
from .graph import CycleBasis, prime_cycle_basis
from .optimizer import Criterion, criterion_value, is_singular, optimize
from .synth import (
    StationaryDistribution,
    TransitionMatrix,
    assemble_stationary,
    build_transition_matrix,
    generate_sequence,
    signal_from_csv,
    signal_to_csv,
)

log = logging.getLogger("cycledesign")

BASIS_FILE = "cycle_basis.json"
MATRICES_FILE = "info_matrices.json"
DESIGN_FILE = "design.json"
STATIONARY_FILE = "stationary.csv"
TRANSITION_FILE = "transition.json"
EVALUATION_FILE = "evaluation.json"
MANIFEST_FILE = "manifest.json"


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str) -> dict:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return {"sha256": hashlib.sha256(text.encode()).hexdigest()}


def _update_manifest(directory: Path, key: str, cfg: RunConfig, artifacts: dict, seed=None) -> None:
    path = directory / MANIFEST_FILE
    doc = {"format": "cycledesign/manifest", "version": 1, "runs": {}}
    if path.exists():
        try:
            doc = json.loads(path.read_text())
        except json.JSONDecodeError:
            log.warning("replacing unreadable manifest %s", path)
    doc["package_version"] = __version__
    doc.setdefault("runs", {})[key] = {
        "config_sha256": cfg.digest,
        "seed": cfg.seed if seed is None else seed,
        "artifacts": artifacts,
    }
    _write(path, dumps(doc))


def load_or_enumerate(cfg: RunConfig) -> CycleBasis:
    """Reuse ``cfg.cycle_cache`` when it matches the alphabet and memory, else enumerate."""
    cache = cfg.cycle_cache
    if cache is not None and cache.exists():
        basis = CycleBasis.from_dict(json.loads(cache.read_text()))
        if basis.graph.alphabet == cfg.alphabet and basis.graph.memory == cfg.memory:
            return basis
        log.warning("cycle cache %s is for a different alphabet/memory; recomputing", cache)
    basis = prime_cycle_basis(cfg.alphabet, cfg.memory, cfg.max_nodes)
    if cache is not None:
        _write(cache, dumps(basis.to_dict()))
    return basis


def basis_matrices(cfg: RunConfig, basis: CycleBasis) -> list[InfoMatrix]:
    if cfg.info_method == "exact":
        work = lambda c: exact_cycle_info_matrix(cfg.model, c)  # noqa: E731
    else:
        work = lambda c: cycle_info_matrix(cfg.model, c, cfg.N)  # noqa: E731
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(work, basis))
    return [work(c) for c in basis]


def cmd_enumerate(cfg: RunConfig, out: Path | None = None) -> Path:
    t0 = time.perf_counter()
    basis = prime_cycle_basis(cfg.alphabet, cfg.memory, cfg.max_nodes)
    if out is not None:
        target = Path(out) / BASIS_FILE
    elif cfg.cycle_cache is not None:
        target = cfg.cycle_cache
    else:
        target = cfg.output_dir / BASIS_FILE
    info = _write(target, dumps(basis.to_dict()))
    _update_manifest(target.parent, "enumerate-cycles", cfg, {target.name: info})
    print(f"n_V = {len(basis)} prime cycles ({time.perf_counter() - t0:.3f} s) -> {target}")
    return target


def cmd_design(cfg: RunConfig, out: Path | None = None) -> Path:
    out = Path(out) if out is not None else cfg.output_dir
    basis = load_or_enumerate(cfg)
    mats = basis_matrices(cfg, basis)
    result = optimize(mats, cfg.criterion, cfg.tolerance, cfg.max_iterations)
    stationary = assemble_stationary(result.weights, basis)
    A = build_transition_matrix(result.weights, basis, cfg.transition)

    artifacts = {
        BASIS_FILE: _write(out / BASIS_FILE, dumps(basis.to_dict())),
        MATRICES_FILE: _write(out / MATRICES_FILE, dumps(matrices_to_dict(mats))),
        DESIGN_FILE: _write(out / DESIGN_FILE, dumps(result.to_dict())),
        STATIONARY_FILE: _write(out / STATIONARY_FILE, stationary.to_csv()),
        TRANSITION_FILE: _write(out / TRANSITION_FILE, dumps(A.to_dict())),
    }
    _update_manifest(out, "design", cfg, artifacts)

    if result.criterion is Criterion.D:
        print(f"det(I_app) = {result.reported:.6g}  (log det = {result.objective:.6g})")
    else:
        print(f"tr(I_app^-1) = {result.reported:.6g}")
    print(f"Frank-Wolfe gap {result.certificate:.3g} after {result.iterations} iterations")
    if not result.converged:
        raise NotConvergedError(
            f"gap {result.certificate:.3g} above tolerance {result.tolerance:g} "
            f"after {result.iterations} iterations (artifacts written)"
        )
    return out


def _read_stationary(path: Path, A: TransitionMatrix) -> StationaryDistribution:
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    try:
        probs = [float(ln.rsplit(",", 1)[1]) for ln in lines[1:]]
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"malformed stationary distribution file {path}: {exc}") from exc
    return StationaryDistribution(A.graph, np.asarray(probs))


def cmd_synthesize(cfg: RunConfig, design: Path, out: Path, length: int | None = None, seed: int | None = None) -> Path:
    design, out = Path(design), Path(out)
    length = cfg.sequence_length if length is None else length
    seed = cfg.seed if seed is None else seed
    try:
        A = TransitionMatrix.from_dict(json.loads((design / TRANSITION_FILE).read_text()))
        stationary = _read_stationary(design / STATIONARY_FILE, A)
    except FileNotFoundError as exc:
        raise ConfigError(f"design artifacts missing in {design}: {exc.filename}") from exc
    if A.graph.alphabet != cfg.alphabet or A.graph.memory != cfg.memory:
        raise ConfigError(f"design in {design} does not match the configured alphabet/memory")
    signal = generate_sequence(A, stationary, length, seed, cfg.chain_burn_in)
    info = _write(out, signal_to_csv(signal))
    info.update(length=length, transition=A.method)
    _update_manifest(out.parent, f"synthesize:{out.name}", cfg, {out.name: info}, seed=seed)
    print(f"wrote {length} samples (seed {seed}) -> {out}")
    return out


def _finite(x: float):
    return x if math.isfinite(x) else None


def cmd_evaluate(cfg: RunConfig, signal_path: Path, out: Path | None = None) -> Path:
    signal_path = Path(signal_path)
    out = Path(out) if out is not None else cfg.output_dir
    try:
        signal = signal_from_csv(signal_path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read signal {signal_path}: {exc}") from exc
    bad = [v for v in set(signal.samples.tolist()) if v not in cfg.alphabet.values]
    if bad:
        log.warning("signal contains values outside the alphabet: %s", sorted(bad)[:5])
    info = sampled_info_matrix(cfg.model, signal)
    singular = is_singular(info.matrix)
    logdet = criterion_value(info, Criterion.D)
    doc = {
        "format": "cycledesign/evaluation",
        "version": 1,
        "signal": signal_path.name,
        "sample_count": info.sample_count,
        "matrix": info.matrix.tolist(),
        "singular": singular,
        "logdet": _finite(logdet),
        "det": float(np.linalg.det(info.matrix)) if not singular else 0.0,
        "trace_inverse": None if singular else -criterion_value(info, Criterion.A),
    }
    artifacts = {EVALUATION_FILE: _write(out / EVALUATION_FILE, dumps(doc))}
    _update_manifest(out, f"evaluate:{signal_path.name}", cfg, artifacts)
    if singular:
        print("sampled information matrix is singular")
    else:
        print(f"det(I) = {doc['det']:.6g}  tr(I^-1) = {doc['trace_inverse']:.6g}")
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cycledesign", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate-cycles", help="enumerate and cache the prime-cycle basis")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("design", help="optimise the cycle weights and build the Markov chain")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("synthesize", help="generate an input realization from a design")
    p.add_argument("--config", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--length", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="sampled information matrix of a signal")
    p.add_argument("--config", required=True)
    p.add_argument("--signal", required=True)
    p.add_argument("--out")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config)
        if args.command == "enumerate-cycles":
            cmd_enumerate(cfg, args.out)
        elif args.command == "design":
            cmd_design(cfg, args.out)
        elif args.command == "synthesize":
            cmd_synthesize(cfg, args.design, args.out, args.length, args.seed)
        else:
            cmd_evaluate(cfg, args.signal, args.out)
    except InputDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
