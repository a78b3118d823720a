"""Concave design criteria maximised over the probability simplex.

The combined information matrix ``M(a) = sum_i a_i I_i`` is linear in the
weights, so both criteria below are concave in ``a``:

* ``D``: ``log det M`` (reported as ``det M``)
* ``A``: ``-tr(M^-1)`` (reported as ``tr(M^-1)``)

The solver is Frank-Wolfe with away steps.  The line search is solved in
closed form along the segment after whitening by the current iterate, with a
halving fallback that only accepts finite, non-decreasing objective values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, SingularDesignError
from .fisher import InfoMatrix

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 100_000


class Criterion(str, enum.Enum):
    D = "D"
    A = "A"

    @classmethod
    def parse(cls, value) -> "Criterion":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ConfigError(f"unknown criterion {value!r}; expected 'D' or 'A'") from None


@dataclass(frozen=True, eq=False)
class DesignResult:
    weights: np.ndarray
    objective: float
    certificate: float
    iterations: int
    criterion: Criterion
    converged: bool = True
    tolerance: float = DEFAULT_TOLERANCE
    matrix: np.ndarray | None = field(default=None, repr=False)

    @property
    def reported(self) -> float:
        """``det M`` for D designs, ``tr(M^-1)`` for A designs."""
        if self.criterion is Criterion.D:
            return math.exp(self.objective)
        return -self.objective

    def to_dict(self) -> dict:
        doc = {
            "format": "cycledesign/design-result",
            "version": 1,
            "criterion": self.criterion.value,
            "weights": [{"cycle": i, "weight": float(w)} for i, w in enumerate(self.weights)],
            "certificate": float(self.certificate),
            "tolerance": float(self.tolerance),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
        }
        if self.criterion is Criterion.D:
            doc["logdet"] = float(self.objective)
            doc["det"] = float(math.exp(self.objective))
        else:
            doc["neg_trace_inverse"] = float(self.objective)
            doc["trace_inverse"] = float(-self.objective)
        return doc


def _as_array(M) -> np.ndarray:
    return M.matrix if isinstance(M, InfoMatrix) else np.asarray(M, dtype=float)


def is_singular(M: np.ndarray) -> bool:
    """Numerical rank test on the eigenvalues (same threshold as ``numpy.linalg.matrix_rank``)."""
    w = np.linalg.eigvalsh(0.5 * (M + M.T))
    top = w[-1] if w.size else 0.0
    return bool(top <= 0 or w[0] <= top * M.shape[0] * np.finfo(float).eps)


def _value(M: np.ndarray, criterion: Criterion) -> float:
    """Criterion value, ``-inf`` outside the domain."""
    if is_singular(M):
        return -math.inf
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return -math.inf
    if criterion is Criterion.D:
        return 2.0 * float(np.sum(np.log(np.diag(L))))
    Linv = np.linalg.solve(L, np.eye(M.shape[0]))
    return -float(np.sum(Linv * Linv))


def criterion_value(M, criterion: Criterion | str) -> float:
    """``log det M`` for D (``-inf`` when singular), ``-tr(M^-1)`` for A."""
    criterion = Criterion.parse(criterion)
    M = _as_array(M)
    val = _value(M, criterion)
    if val == -math.inf and criterion is Criterion.A:
        raise SingularDesignError("A criterion is undefined for a singular information matrix")
    return val


def _gradient(M: np.ndarray, stack: np.ndarray, criterion: Criterion) -> np.ndarray:
    Minv = np.linalg.inv(M)
    if criterion is Criterion.D:
        G = Minv
    else:
        G = Minv @ Minv
    G = 0.5 * (G + G.T)
    return np.einsum("ij,kij->k", G, stack)


def fw_gap(weights: Sequence[float], basis_matrices, criterion: Criterion | str) -> float:
    """``max_j <grad, e_j - a>`` at ``weights``."""
    criterion = Criterion.parse(criterion)
    stack = np.stack([_as_array(m) for m in basis_matrices])
    a = np.asarray(weights, dtype=float)
    g = _gradient(np.tensordot(a, stack, axes=1), stack, criterion)
    return float(g.max() - g @ a)


def _step_length(M: np.ndarray, D: np.ndarray, criterion: Criterion, smax: float) -> float:
    """Maximiser of the criterion on ``M + s D`` for ``s`` in ``[0, smax]``."""
    L = np.linalg.cholesky(M)
    Linv = np.linalg.solve(L, np.eye(M.shape[0]))
    B = Linv @ D @ Linv.T
    lam, Q = np.linalg.eigh(0.5 * (B + B.T))
    if criterion is Criterion.D:

        def slope(s):
            return float(np.sum(lam / (1.0 + s * lam)))

    else:
        w = np.sum((Linv.T @ Q) ** 2, axis=0)

        def slope(s):
            return float(np.sum(w * lam / (1.0 + s * lam) ** 2))

    hi = smax
    neg = lam < 0
    if neg.any():
        hi = min(hi, float(np.min(-1.0 / lam[neg])) * (1.0 - 1e-12))
    if slope(hi) >= 0:
        return hi
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    return lo


def _start(stack: np.ndarray, criterion: Criterion) -> np.ndarray:
    n = stack.shape[0]
    uniform = np.full(n, 1.0 / n)
    if math.isfinite(_value(np.tensordot(uniform, stack, axes=1), criterion)):
        return uniform
    vals = [_value(stack[j], criterion) for j in range(n)]
    best = int(np.argmax(vals))
    if not math.isfinite(vals[best]):
        raise SingularDesignError(
            "singular design: no weight vector gives a nonsingular information matrix"
        )
    # pull toward uniform, less if the perturbed point is itself singular
    for mix in (0.01, 1e-4, 1e-8, 0.0):
        a = mix * uniform
        a[best] += 1.0 - mix
        if math.isfinite(_value(np.tensordot(a, stack, axes=1), criterion)):
            return a
    raise AssertionError("unreachable: the vertex itself is finite")


def optimize(
    basis_matrices: Sequence[InfoMatrix | np.ndarray],
    criterion: Criterion | str = Criterion.D,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> DesignResult:
    """Maximise the criterion of ``sum_i a_i I_i`` over the simplex.

    Stops once the Frank-Wolfe gap is at most ``tolerance``.  If
    ``max_iterations`` runs out first the result is returned with
    ``converged=False``.
    """
    criterion = Criterion.parse(criterion)
    if not basis_matrices:
        raise ConfigError("at least one basis matrix is required")
    if not tolerance > 0:
        raise ConfigError(f"tolerance must be positive, got {tolerance}")
    if max_iterations < 1:
        raise ConfigError(f"max_iterations must be positive, got {max_iterations}")
    arrays = [_as_array(m) for m in basis_matrices]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1 or len(arrays[0].shape) != 2 or arrays[0].shape[0] != arrays[0].shape[1]:
        raise ConfigError(f"basis matrices must be square and equal-sized, got shapes {sorted(shapes)}")
    stack = np.stack(arrays)

    a = _start(stack, criterion)
    M = np.tensordot(a, stack, axes=1)
    f = _value(M, criterion)
    it = 0
    while True:
        g = _gradient(M, stack, criterion)
        ga = float(g @ a)
        j = int(np.argmax(g))
        gap = float(g[j] - ga)
        if gap <= tolerance or it >= max_iterations:
            break
        it += 1
        support = np.flatnonzero(a > 0)
        i = int(support[np.argmin(g[support])])
        if gap >= ga - g[i] or a[i] >= 1.0:
            d = -a.copy()
            d[j] += 1.0
            smax = 1.0
            away = False
        else:
            d = a.copy()
            d[i] -= 1.0
            smax = a[i] / (1.0 - a[i])
            away = True
        D = np.tensordot(d, stack, axes=1)
        s = _step_length(M, D, criterion, smax)
        while True:
            trial = a + s * d
            if away and s == smax:
                trial[i] = 0.0
            trial = np.clip(trial, 0.0, None)
            trial /= trial.sum()
            M_trial = np.tensordot(trial, stack, axes=1)
            f_trial = _value(M_trial, criterion)
            if math.isfinite(f_trial) and f_trial >= f - 1e-14 * abs(f):
                break
            s *= 0.5
            if s < 1e-300:
                trial, M_trial, f_trial = a, M, f
                break
        if trial is a:
            break
        a, M, f = trial, M_trial, f_trial

    return DesignResult(
        weights=a,
        objective=f,
        certificate=max(gap, 0.0),
        iterations=it,
        criterion=criterion,
        converged=gap <= tolerance,
        tolerance=tolerance,
        matrix=M,
    )
