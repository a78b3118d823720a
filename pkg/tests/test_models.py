import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from cycledesign import (
    ConfigError,
    ExternalModel,
    ModelError,
    ModelSpec,
    NumericalError,
    Signal,
    gradient_trace,
    model_memory,
    predictor_output,
)
from cycledesign.models import INFINITE

ROUNDED = (4.86e-3, 4.75e-3, -1.84, 0.94)
ZOH = (0.00485574, 0.00475411, -1.84261398, 0.93871252)


def fir(theta=(1.0, 1.0, 1.0, 1.0)):
    return ModelSpec("nonlinear-fir", theta)


def oe(theta=ROUNDED, burn_in=0):
    return ModelSpec("output-error-2-2", theta, noise_variance=1e-4, burn_in=burn_in)


def test_fir_regressors_by_hand():
    psi = gradient_trace(fir(), Signal([1, 0, 1], (0,))).psi
    assert psi.tolist() == [[1, 0, 1, 0], [0, 1, 0, 1], [1, 0, 1, 0]]


def test_fir_zero_signal():
    assert not gradient_trace(fir(), Signal(np.zeros(7))).psi.any()


def test_fir_missing_history_is_zero():
    psi = gradient_trace(fir(), Signal([2.0, -1.0])).psi
    assert psi[0].tolist() == [2.0, 0.0, 4.0, 0.0]


def test_model_memory():
    assert model_memory(fir()) == 2
    assert model_memory(oe()) == INFINITE
    ext = ExternalModel(lambda u, p, th: u[:, None], memory=1)
    assert model_memory(ModelSpec("external", (1.0,), external=ext)) == 1


def test_oe_gradient_matches_finite_differences_tightly():
    rng = np.random.default_rng(7)
    u = rng.choice([-1.0, 1.0], 200)
    psi = gradient_trace(oe(), Signal(u)).psi
    fd = oracles.central_difference(lambda th: oracles.oe_predict(u, (0.0, 0.0), th), ROUNDED, richardson=True)
    assert oracles.relative_error(psi, fd, 1e-9).max() < 1e-6


@pytest.mark.parametrize("theta", [ROUNDED, ZOH, (0.3, -0.2, -0.5, 0.2), (1.0, 0.5, 0.0, -0.81)])
@pytest.mark.parametrize("seed", [0, 1])
def test_oe_gradient_matches_finite_differences(theta, seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 501))
    u = rng.choice([-1.0, 0.0, 1.0], n)
    prefill = tuple(rng.choice([-1.0, 1.0], 2))
    psi = gradient_trace(oe(theta), Signal(u, prefill)).psi
    # the eps**2 term alone exceeds 1e-5 relative where a sensitivity crosses zero
    fd = oracles.central_difference(lambda th: oracles.oe_predict(u, prefill, th), theta, richardson=True)
    assert oracles.relative_error(psi, fd, 1e-9).max() < 1e-5


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=500),
    st.floats(-2, 2, allow_nan=False),
    st.lists(st.floats(-3, 3, allow_nan=False), min_size=4, max_size=4),
)
def test_fir_gradient_matches_finite_differences(u, u0, theta):
    psi = gradient_trace(fir(theta), Signal(u, (u0,))).psi
    fd = oracles.central_difference(lambda th: oracles.fir_predict(u, u0, th), theta)
    # difference quotients carry roundoff of about eps * |yhat| / step
    yhat = oracles.fir_predict(u, u0, theta)
    floor = 1e6 * np.finfo(float).eps * np.maximum(1.0, np.abs(yhat))[:, None] / 1e-6
    assert oracles.relative_error(psi, fd, floor).max() < 1e-5


def test_predictor_output_matches_loops():
    rng = np.random.default_rng(3)
    u = rng.choice([-1.0, 1.0], 300)
    pre = (1.0, -1.0)
    assert np.allclose(predictor_output(oe(), Signal(u, pre)), oracles.oe_predict(u, pre, ROUNDED), rtol=1e-12, atol=1e-14)
    assert np.allclose(predictor_output(fir((0.5, -1, 2, 3)), Signal(u, pre)), oracles.fir_predict(u, -1.0, (0.5, -1, 2, 3)))


def test_burn_in_drops_leading_rows():
    u = np.random.default_rng(0).choice([-1.0, 1.0], 50)
    full = gradient_trace(oe(burn_in=0), Signal(u)).psi
    cut = gradient_trace(oe(burn_in=10), Signal(u))
    assert cut.start == 11 and len(cut) == 40
    assert np.array_equal(cut.psi, full[10:])


def test_burn_in_must_leave_samples():
    with pytest.raises(ConfigError):
        gradient_trace(oe(burn_in=10), Signal(np.ones(10)))


def test_default_burn_in():
    assert ModelSpec("output-error-2-2", ROUNDED).burn_in == 1000
    assert fir().burn_in == 0


def test_unstable_denominator_rejected():
    with pytest.raises(ModelError):
        ModelSpec("output-error-2-2", (1.0, 1.0, -2.0, 1.0))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="arx", theta0=(1, 1, 1, 1)),
        dict(kind="nonlinear-fir", theta0=(1, 1)),
        dict(kind="nonlinear-fir", theta0=(1, 1, 1, float("inf"))),
        dict(kind="nonlinear-fir", theta0=(1, 1, 1, 1), noise_variance=0.0),
        dict(kind="nonlinear-fir", theta0=(1, 1, 1, 1), burn_in=-1),
        dict(kind="external", theta0=(1.0,)),
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(ConfigError):
        ModelSpec(**kwargs)


def test_non_finite_values_report_time_index():
    bad = ExternalModel(lambda u, p, th: np.where(np.arange(len(u))[:, None] == 4, np.nan, 1.0))
    model = ModelSpec("external", (1.0,), external=bad)
    with pytest.raises(NumericalError, match="t=5"):
        gradient_trace(model, Signal(np.ones(8)))


def test_overflow_reported_as_numerical_error():
    with pytest.raises(NumericalError, match="time index"):
        gradient_trace(oe((1.0, 1.0, -1.99, 0.999)), Signal(np.full(10, 1e306)))


def test_external_gradient_shape_checked():
    bad = ExternalModel(lambda u, p, th: np.ones((len(u), 3)))
    with pytest.raises(ModelError):
        gradient_trace(ModelSpec("external", (1.0, 2.0), external=bad), Signal(np.ones(4)))


def test_gradient_trace_takes_no_noise_input():
    params = list(inspect.signature(gradient_trace).parameters)
    assert params == ["model", "signal"]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=3, max_size=60), st.integers(1, 20))
def test_fir_shift_invariance(u, k):
    # the regressor at a time depends only on the current and previous input
    u = np.array(u)
    shifted = np.concatenate([np.zeros(k), u])
    a = gradient_trace(fir(), Signal(u, (0.0,))).psi
    b = gradient_trace(fir(), Signal(shifted)).psi[k:]
    assert np.array_equal(a, b)


def test_signal_is_read_only():
    s = Signal([1.0, 2.0])
    with pytest.raises(ValueError):
        s.samples[0] = 5.0
