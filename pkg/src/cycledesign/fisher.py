"""Per-sample Fisher information matrices.

All matrices here are normalised per retained sample and divided by the noise
variance, ``(1 / (lambda_e * n)) * sum_t psi_t psi_t^T``.  Multiply by an
experiment length to obtain the information of a whole record.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, NumericalError
from .graph import CycleBasis, ElementaryCycle, cycle_signal
from .models import INFINITE, ModelSpec, Signal, gradient_trace, model_memory

DEFAULT_N = 5000
MIN_PERIODS = 100


@dataclass(frozen=True, eq=False)
class InfoMatrix:
    matrix: np.ndarray
    sample_count: int
    kind: str

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigError(f"information matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericalError("information matrix has non-finite entries")
        m = 0.5 * (m + m.T)
        tr = np.trace(m)
        if m.size and np.linalg.eigvalsh(m).min() < -1e-10 * max(tr, 0.0):
            raise NumericalError("information matrix is not positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _outer_average(psi: np.ndarray, noise_variance: float) -> np.ndarray:
    return psi.T @ psi / (noise_variance * psi.shape[0])


def monte_carlo_length(cycle_length: int, n: int) -> int:
    """Smallest multiple of the cycle length that is at least ``max(n, 100 L)``."""
    if n < cycle_length:
        raise ConfigError(f"N={n} is shorter than the cycle length {cycle_length}")
    n = max(n, MIN_PERIODS * cycle_length)
    return -(-n // cycle_length) * cycle_length


def cycle_info_matrix(model: ModelSpec, cycle: ElementaryCycle, n: int = DEFAULT_N) -> InfoMatrix:
    n = monte_carlo_length(cycle.length, n)
    if model.burn_in >= n:
        raise ConfigError(f"N={n} does not exceed the burn-in {model.burn_in}")
    trace = gradient_trace(model, cycle_signal(cycle, n))
    return InfoMatrix(_outer_average(trace.psi, model.noise_variance), len(trace), "per-cycle")


def exact_cycle_info_matrix(model: ModelSpec, cycle: ElementaryCycle) -> InfoMatrix:
    """Expectation of ``psi psi^T / lambda_e`` under the uniform distribution on the cycle's nodes.

    Only defined when the predictor looks no further back than the node windows.
    """
    mem = model_memory(model)
    nm = cycle.graph.memory
    if mem == INFINITE or mem > nm:
        raise ConfigError(f"exact oracle needs model memory <= {nm}, model has memory {mem}")
    rows = []
    exact = model.replace(burn_in=0)
    for window in cycle.windows():
        sig = Signal(window[-1:], window[:-1])
        rows.append(gradient_trace(exact, sig).psi[0])
    return InfoMatrix(_outer_average(np.asarray(rows), model.noise_variance), cycle.length, "per-cycle")


def basis_info_matrices(
    model: ModelSpec, basis: CycleBasis, n: int = DEFAULT_N, exact: bool = False
) -> list[InfoMatrix]:
    """Information matrix of every basis cycle, in basis order."""
    if exact:
        return [exact_cycle_info_matrix(model, c) for c in basis]
    return [cycle_info_matrix(model, c, n) for c in basis]


def combine(basis_matrices: Sequence[InfoMatrix], gamma: Iterable[float]) -> InfoMatrix:
    gamma = np.asarray(list(gamma), dtype=float)
    if len(basis_matrices) != len(gamma):
        raise ConfigError(f"{len(basis_matrices)} matrices but {len(gamma)} weights")
    if not basis_matrices:
        raise ConfigError("nothing to combine")
    dims = {m.dim for m in basis_matrices}
    if len(dims) != 1:
        raise ConfigError(f"matrices have different dimensions {sorted(dims)}")
    if np.any(gamma < 0) or abs(gamma.sum() - 1.0) > 1e-12:
        raise ConfigError("weights must be nonnegative and sum to one")
    stack = np.stack([m.matrix for m in basis_matrices])
    return InfoMatrix(
        np.tensordot(gamma, stack, axes=1),
        min(m.sample_count for m in basis_matrices),
        "combined",
    )


def sampled_info_matrix(model: ModelSpec, realization: Signal) -> InfoMatrix:
    trace = gradient_trace(model, realization)
    return InfoMatrix(_outer_average(trace.psi, model.noise_variance), len(trace), "sampled")


def matrices_to_dict(matrices: Sequence[InfoMatrix]) -> dict:
    return {
        "format": "cycledesign/info-matrices",
        "version": 1,
        "matrices": [
            {
                "cycle": i,
                "kind": m.kind,
                "sample_count": m.sample_count,
                "matrix": m.matrix.tolist(),
            }
            for i, m in enumerate(matrices)
        ],
    }


def matrices_from_dict(doc: dict) -> list[InfoMatrix]:
    try:
        entries = sorted(doc["matrices"], key=lambda e: e["cycle"])
        return [InfoMatrix(np.asarray(e["matrix"]), e["sample_count"], e["kind"]) for e in entries]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed matrices document: {exc}") from exc
