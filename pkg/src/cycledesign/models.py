"""Predictor gradients for the supported model structures.

``gradient_trace`` maps an input signal to the sequence of predictor
sensitivities ``psi_t = d yhat_t / d theta`` at the true parameters.  The
noise never enters: only its variance scales the information matrix later on.

Built-in structures:

``nonlinear-fir``
    ``yhat_t = th1 u_t + th2 u_{t-1} + th3 u_t^2 + th4 u_{t-1}^2``.
``output-error-2-2``
    ``yhat_t = (th1 q^-1 + th2 q^-2) / (1 + th3 q^-1 + th4 q^-2) u_t``,
    simulated from rest (zero predictor and sensitivity states).
``external``
    user supplied evaluator, see :class:`ExternalModel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, ModelError, NumericalError

INFINITE = "infinite"

NONLINEAR_FIR = "nonlinear-fir"
OUTPUT_ERROR = "output-error-2-2"
EXTERNAL = "external"
KINDS = (NONLINEAR_FIR, OUTPUT_ERROR, EXTERNAL)

DEFAULT_BURN_IN = {NONLINEAR_FIR: 0, OUTPUT_ERROR: 1000, EXTERNAL: 0}


@dataclass(frozen=True, eq=False)
class Signal:
    """Finite input record ``u_1..u_N`` plus optional history ``u_{1-k}..u_0``.

    Inputs before the history are taken as zero.
    """

    samples: np.ndarray
    prefill: tuple[float, ...] = ()

    def __post_init__(self):
        s = np.array(self.samples, dtype=float).ravel()
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "prefill", tuple(float(v) for v in self.prefill))

    def __len__(self) -> int:
        return len(self.samples)

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return self.prefill == other.prefill and np.array_equal(self.samples, other.samples)

    def with_history(self, k: int) -> np.ndarray:
        """``u_{1-k}, ..., u_N`` as one array (zeros beyond the prefill)."""
        hist = np.zeros(k)
        p = np.asarray(self.prefill[-k:] if k else (), dtype=float)
        if len(p):
            hist[k - len(p):] = p
        return np.concatenate([hist, self.samples])


@dataclass(frozen=True)
class ExternalModel:
    """Extension point for user models.

    ``gradient(samples, prefill, theta)`` must return an ``(N, m)`` array of
    predictor gradients; ``predict(samples, prefill, theta)`` (optional) the
    ``N`` predictor outputs.  ``memory`` is the number of inputs the predictor
    looks at (``"infinite"`` for dynamic models).
    """

    gradient: Callable[[np.ndarray, tuple, np.ndarray], np.ndarray]
    memory: int | str = INFINITE
    predict: Callable[[np.ndarray, tuple, np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    theta0: tuple[float, ...]
    noise_variance: float = 1.0
    burn_in: int | None = None
    external: ExternalModel | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        theta = tuple(float(v) for v in np.atleast_1d(np.asarray(self.theta0, dtype=float)))
        object.__setattr__(self, "theta0", theta)
        if not theta or not all(math.isfinite(v) for v in theta):
            raise ConfigError(f"theta0 must be a nonempty finite vector, got {self.theta0}")
        lam = float(self.noise_variance)
        if not (lam > 0 and math.isfinite(lam)):
            raise ConfigError(f"noise variance must be positive, got {self.noise_variance}")
        object.__setattr__(self, "noise_variance", lam)
        burn = DEFAULT_BURN_IN[self.kind] if self.burn_in is None else self.burn_in
        if isinstance(burn, bool) or int(burn) != burn or burn < 0:
            raise ConfigError(f"burn_in must be a nonnegative integer, got {self.burn_in}")
        object.__setattr__(self, "burn_in", int(burn))

        if self.kind in (NONLINEAR_FIR, OUTPUT_ERROR) and len(theta) != 4:
            raise ConfigError(f"{self.kind} has 4 parameters, got {len(theta)}")
        if self.kind == OUTPUT_ERROR:
            roots = np.roots([1.0, theta[2], theta[3]])
            if np.any(np.abs(roots) >= 1.0):
                raise ModelError(
                    f"denominator 1 + {theta[2]} q^-1 + {theta[3]} q^-2 is unstable "
                    f"(root moduli {np.abs(roots)})"
                )
        if self.kind == EXTERNAL and self.external is None:
            raise ConfigError("external model kind needs an ExternalModel evaluator")

    @property
    def n_params(self) -> int:
        return len(self.theta0)

    def replace(self, **changes) -> "ModelSpec":
        from dataclasses import replace

        return replace(self, **changes)


@dataclass(frozen=True, eq=False)
class GradientTrace:
    """``psi`` holds one row per retained time step; ``start`` is the first step (1-based)."""

    psi: np.ndarray
    start: int = 1

    def __len__(self) -> int:
        return self.psi.shape[0]


def model_memory(model: ModelSpec) -> int | str:
    if model.kind == NONLINEAR_FIR:
        return 2
    if model.kind == OUTPUT_ERROR:
        return INFINITE
    return model.external.memory


def _fir(u: np.ndarray) -> np.ndarray:
    # u holds u_0..u_N
    cur, prev = u[1:], u[:-1]
    return np.column_stack([cur, prev, cur**2, prev**2])


def _oe_states(u: np.ndarray, theta: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    # u holds u_{-1}, u_0, ..., u_N; returns yhat_1..N and psi rows for t = 1..N
    th1, th2, th3, th4 = theta
    den = [1.0, th3, th4]
    u1, u2 = u[1:-1], u[:-2]  # u_{t-1}, u_{t-2}
    yhat = lfilter([1.0], den, th1 * u1 + th2 * u2)
    y_ext = np.concatenate([[0.0, 0.0], yhat])
    y1, y2 = y_ext[1:-1], y_ext[:-2]
    drive = np.column_stack([u1, u2, -y1, -y2])
    psi = lfilter([1.0], den, drive, axis=0)
    return yhat, psi


def _check_finite(arr: np.ndarray, what: str) -> None:
    bad = ~np.isfinite(arr)
    if bad.any():
        t = int(np.argwhere(bad)[0][0]) + 1
        raise NumericalError(f"non-finite {what} at time index t={t}")


def _burn(model: ModelSpec, n: int) -> int:
    if n < 1:
        raise ConfigError("signal is empty")
    if model.burn_in >= n:
        raise ConfigError(f"signal length {n} does not exceed burn-in {model.burn_in}")
    return model.burn_in


def gradient_trace(model: ModelSpec, signal: Signal) -> GradientTrace:
    """Predictor gradients ``psi_t(theta0)`` for ``t = burn_in+1 .. N``."""
    burn = _burn(model, len(signal))
    if model.kind == NONLINEAR_FIR:
        psi = _fir(signal.with_history(1))
    elif model.kind == OUTPUT_ERROR:
        with np.errstate(over="ignore", invalid="ignore"):
            yhat, psi = _oe_states(signal.with_history(2), model.theta0)
        _check_finite(yhat, "predictor output")
    else:
        psi = np.asarray(
            model.external.gradient(signal.samples, signal.prefill, np.asarray(model.theta0)),
            dtype=float,
        )
        if psi.ndim == 1:
            psi = psi[:, None]
        if psi.shape != (len(signal), model.n_params):
            raise ModelError(
                f"external gradient returned shape {psi.shape}, "
                f"expected {(len(signal), model.n_params)}"
            )
    _check_finite(psi, "predictor gradient")
    return GradientTrace(psi[burn:], burn + 1)


def predictor_output(model: ModelSpec, signal: Signal, theta: Sequence[float] | None = None) -> np.ndarray:
    """``yhat_t(theta)`` for every ``t = 1..N`` (no burn-in applied)."""
    theta = np.asarray(model.theta0 if theta is None else theta, dtype=float)
    if model.kind == NONLINEAR_FIR:
        return _fir(signal.with_history(1)) @ theta
    if model.kind == OUTPUT_ERROR:
        return _oe_states(signal.with_history(2), theta)[0]
    if model.external.predict is None:
        raise ModelError("external model does not provide a predictor")
    return np.asarray(model.external.predict(signal.samples, signal.prefill, theta), dtype=float)
