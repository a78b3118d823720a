import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cycledesign import (
    ConfigError,
    Criterion,
    InfoMatrix,
    SingularDesignError,
    criterion_value,
    fw_gap,
    optimize,
)
from cycledesign.optimizer import _gradient

BOTH = [Criterion.D, Criterion.A]


def random_spd(rng, m, rank=None):
    B = rng.normal(size=(m, rank or m))
    return B @ B.T


def test_single_matrix():
    M = np.array([[2.0, 0.5], [0.5, 1.0]])
    for crit in BOTH:
        res = optimize([M], crit)
        assert res.weights.tolist() == [1.0]
        assert res.objective == pytest.approx(criterion_value(M, crit))


def test_diagonal_pair_d():
    res = optimize([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])], "D")
    assert np.allclose(res.weights, [0.5, 0.5], atol=1e-6)
    assert res.reported == pytest.approx(0.25, abs=1e-9)


def test_criterion_values():
    assert criterion_value(np.eye(2), "D") == 0.0
    assert criterion_value(np.diag([2.0, 0.5]), "A") == pytest.approx(-2.5)
    assert criterion_value(np.diag([1.0, 0.0]), "D") == -math.inf
    with pytest.raises(SingularDesignError):
        criterion_value(np.diag([1.0, 0.0]), "A")


def test_parse_criterion():
    assert Criterion.parse("a") is Criterion.A
    assert Criterion.parse(Criterion.D) is Criterion.D
    with pytest.raises(ConfigError):
        Criterion.parse("E")


def test_singular_design_raises():
    with pytest.raises(SingularDesignError, match="singular design"):
        optimize([np.diag([1.0, 0.0]), np.diag([2.0, 0.0])], "D")


def test_singular_uniform_start_falls_back_to_vertex():
    # the uniform mix has condition number ~1e20, numerically singular
    mats = [np.eye(2), np.diag([1e20, 0.0])]
    res = optimize(mats, "A")
    assert res.converged and math.isfinite(res.objective)
    assert res.weights[0] > 0.99


def test_not_converged_is_flagged():
    rng = np.random.default_rng(0)
    mats = [random_spd(rng, 3, 1) for _ in range(6)]
    res = optimize(mats, "D", tolerance=1e-14, max_iterations=2)
    assert not res.converged and res.iterations == 2
    assert res.certificate > 1e-14


def test_bad_arguments():
    with pytest.raises(ConfigError):
        optimize([], "D")
    with pytest.raises(ConfigError):
        optimize([np.eye(2)], "D", tolerance=0)
    with pytest.raises(ConfigError):
        optimize([np.eye(2), np.eye(3)], "D")


@pytest.mark.parametrize("crit", BOTH)
@pytest.mark.parametrize("name", ["example1", "example2"])
def test_examples_certificate_and_vertex_dominance(name, crit, request):
    mats = request.getfixturevalue(name)[1]
    res = optimize(mats, crit)
    assert res.converged and 0 <= res.certificate <= 1e-8
    assert abs(fw_gap(res.weights, mats, crit) - res.certificate) <= 1e-10
    assert np.all(res.weights >= 0) and abs(res.weights.sum() - 1) <= 1e-12
    for M in mats:
        val = criterion_value(M, Criterion.D) if crit is Criterion.D else None
        if crit is Criterion.A:
            try:
                val = criterion_value(M, crit)
            except SingularDesignError:
                continue
        if math.isfinite(val):
            assert res.objective >= val


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(BOTH), st.integers(2, 7))
def test_random_problems_reach_certificate(seed, crit, n):
    rng = np.random.default_rng(seed)
    mats = [random_spd(rng, 3, int(rng.integers(1, 4))) for _ in range(n)]
    if np.linalg.matrix_rank(sum(mats)) < 3:
        return
    res = optimize(mats, crit)
    assert res.converged
    assert abs(fw_gap(res.weights, mats, crit) - res.certificate) <= 1e-10
    # concavity: the gap bounds the distance to any other simplex point's value
    for _ in range(5):
        other = rng.dirichlet(np.ones(n))
        M = np.tensordot(other, np.stack(mats), axes=1)
        try:
            val = criterion_value(M, crit)
        except SingularDesignError:
            continue
        assert val <= res.objective + res.certificate + 1e-9


@pytest.mark.parametrize("crit", BOTH)
def test_gradient_matches_finite_differences(crit):
    rng = np.random.default_rng(5)
    mats = np.stack([random_spd(rng, 4, 2) for _ in range(6)])
    for _ in range(10):
        a = rng.dirichlet(np.ones(6))
        M = np.tensordot(a, mats, axes=1)
        g = _gradient(M, mats, crit)
        for _ in range(3):
            j, k = rng.choice(6, 2, replace=False)
            d = np.zeros(6)
            d[j], d[k] = 1.0, -1.0  # stays on the simplex plane
            h = 1e-6 * min(1.0, a[k])
            f = lambda s: criterion_value(np.tensordot(a + s * d, mats, axes=1), crit)  # noqa: E731
            fd = (f(h) - f(-h)) / (2 * h)
            assert abs(fd - (g[j] - g[k])) <= 1e-5 * max(abs(fd), 1e-8)


@pytest.mark.parametrize("crit", BOTH)
@pytest.mark.parametrize("scale", [1e-6, 0.3, 7.0, 1e8])
def test_scale_invariance(example1, crit, scale):
    mats = example1[1]
    base = optimize(mats, crit)
    # the gap of the A objective scales with 1/scale, the D gap does not
    tol = 1e-8 / scale if crit is Criterion.A else 1e-8
    scaled = optimize([InfoMatrix(m.matrix * scale, m.sample_count, m.kind) for m in mats], crit, tol)
    assert np.max(np.abs(base.weights - scaled.weights)) <= 1e-3
    if crit is Criterion.D:
        assert scaled.objective == pytest.approx(base.objective + 4 * math.log(scale), abs=1e-7)
    else:
        assert scaled.reported == pytest.approx(base.reported / scale, rel=1e-7)


@pytest.mark.parametrize("crit", BOTH)
def test_scale_invariance_example2(example2, crit):
    mats = example2[1]
    base = optimize(mats, crit)
    tol = 1e-8 / 1e-4 if crit is Criterion.A else 1e-8
    scaled = optimize([m.matrix * 1e-4 for m in mats], crit, tol)
    assert np.max(np.abs(base.weights - scaled.weights)) <= 1e-3


@pytest.mark.parametrize("crit", BOTH)
def test_permutation_equivariance(example1, crit):
    mats = example1[1]
    perm = np.random.default_rng(1).permutation(len(mats))
    base = optimize(mats, crit)
    permuted = optimize([mats[i] for i in perm], crit)
    assert np.max(np.abs(permuted.weights - base.weights[perm])) <= 1e-3
    assert permuted.objective == pytest.approx(base.objective, abs=1e-8)


def test_result_json(example1):
    res = optimize(example1[1], "D")
    doc = json.loads(json.dumps(res.to_dict()))
    assert doc["det"] == pytest.approx(res.reported)
    assert doc["logdet"] == pytest.approx(res.objective)
    assert len(doc["weights"]) == 8 and doc["converged"] is True
