import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shapesync import dynamics as dyn
from shapesync import matso
from shapesync.ensemble import EnsembleState, regular_polygon, regular_simplex
from shapesync.errors import CoincidentCentroidsWarning, ValidationError

from conftest import random_state

J = np.array([[0.0, -1.0], [1.0, 0.0]])
P1 = dyn.ModelParams(m=1.0, gamma=1.0, kappa=1.0)
seeds = st.integers(0, 10_000)


def planar_state(thetas, centroids=None, angular=None):
    n = len(thetas)
    c = np.zeros((n, 2)) if centroids is None else np.asarray(centroids, float)
    W = np.zeros((n, 2, 2)) if angular is None else angular
    return EnsembleState(c, np.zeros((n, 2)), np.array([matso.rotation_2d(t) for t in thetas]), W, regular_polygon(3))


def test_coupling_term_examples():
    O = np.array([np.eye(3)] * 4)
    assert np.array_equal(dyn.coupling_term(0, O, None, 1.0), np.zeros((3, 3)))
    R = [matso.rotation_2d(0.0), matso.rotation_2d(np.pi / 2)]
    out = dyn.coupling_term(0, R, [1.0, 1.0], 1.0, 2)
    assert np.allclose(out, 0.5 * J, atol=1e-15)


@given(seeds)
def test_coupling_is_exactly_skew(seed):
    s = random_state(seed, n=5, d=3)
    C = dyn.coupling_terms(s.rotations, 0.7, dyn.similarity_weights(np.arange(1, 6)))
    assert np.array_equal(C, -np.swapaxes(C, 1, 2))
    for i in range(5):
        Ci = dyn.coupling_term(i, s.rotations, None, 0.7)
        assert np.array_equal(Ci, -Ci.T)
        assert np.allclose(Ci, dyn.coupling_terms(s.rotations, 0.7)[i], atol=1e-14)


def test_coupling_term_matches_pairwise_sum():
    s = random_state(1, n=4, d=3)
    O, kappa = s.rotations, 1.3
    w = np.array([0.5, 1.0, 2.0, 3.0])
    for i in range(4):
        brute = sum(w[k] * (O[k] @ O[i].T - O[i] @ O[k].T) for k in range(4)) * kappa / 8
        assert np.allclose(dyn.coupling_term(i, O, w, kappa), brute, atol=1e-14)


def test_centroid_order2_examples():
    s = planar_state([0.0, 0.0], centroids=[[0.0, 0.0], [2.0, 0.0]])
    _, acc = dyn.rhs_centroid_order2(s, P1)
    assert np.allclose(acc[0], [1.0, 0.0])
    s = planar_state([0.0] * 3, centroids=[[1.0, 1.0]] * 3)
    assert np.array_equal(dyn.rhs_centroid_order2(s, P1)[1], np.zeros((3, 2)))
    with pytest.raises(ValidationError):
        dyn.rhs_centroid_order2(s, dyn.ModelParams(m=0.0))


def test_centroid_order1_examples():
    s = planar_state([0.0], centroids=[[3.0, 4.0]])
    assert np.array_equal(dyn.rhs_centroid_order1(s, P1), np.zeros((1, 2)))
    kappa = 2.5
    s = planar_state([0.0, 0.0], centroids=[[1.0, -2.0], [4.0, 2.0]])
    dx = dyn.rhs_centroid_order1(s, dyn.ModelParams(m=0.0, kappa=kappa))
    q = s.centroids[0] - s.centroids[1]
    assert np.allclose(dx[0] - dx[1], -kappa * q)


@given(seeds, st.floats(-50, 50))
def test_translation_invariance(seed, shift):
    s = random_state(seed, n=5, d=3)
    t = s.replace(centroids=s.centroids + shift)
    assert np.allclose(dyn.rhs_centroid_order1(s, P1), dyn.rhs_centroid_order1(t, P1), atol=1e-12)
    assert np.allclose(dyn.rhs_centroid_order2(s, P1)[1], dyn.rhs_centroid_order2(t, P1)[1], atol=1e-12)


@given(seeds)
def test_mean_dynamics(seed):
    s = random_state(seed, n=6, d=3)
    p = dyn.ModelParams(m=2.0, gamma=0.7, kappa=1.5)
    assert np.allclose(dyn.rhs_centroid_order1(s, p).sum(axis=0), 0.0, atol=1e-12)
    acc = dyn.rhs_centroid_order2(s, p)[1]
    assert np.allclose(acc.sum(axis=0), -(p.gamma / p.m) * s.velocities.sum(axis=0), atol=1e-12)


def test_lohe_order2_examples():
    s = EnsembleState(np.zeros((3, 3)), np.zeros((3, 3)), np.array([matso.random_rotation(4, 3)] * 3),
                      np.zeros((3, 3, 3)), regular_simplex(3))
    dO, dW = dyn.rhs_lohe_order2(s, P1)
    assert np.array_equal(dO, np.zeros_like(dO))
    assert np.allclose(dW, 0.0, atol=1e-15)

    W0 = matso.random_skew(np.random.default_rng(0), 3)
    p = dyn.ModelParams(m=2.0, gamma=3.0, kappa=1.0)
    single = EnsembleState(np.zeros((1, 3)), np.zeros((1, 3)), matso.random_rotation(1, 3)[None], W0[None],
                           regular_simplex(3))
    _, dW = dyn.rhs_lohe_order2(single, p)
    assert np.allclose(dW[0], -p.gamma * W0 / p.m, atol=1e-15)
    with pytest.raises(ValidationError):
        dyn.rhs_lohe_order2(single, dyn.ModelParams(m=0.0))


@given(seeds)
def test_lohe_order2_angular_derivative_is_skew(seed):
    s = random_state(seed, n=5, d=4)
    _, dW = dyn.rhs_lohe_order2(s, P1)
    assert np.max(matso.skew_defect(dW)) <= 1e-13


@given(seeds)
def test_right_invariance(seed):
    s = random_state(seed, n=5, d=3)
    R = matso.random_rotation(seed + 1, 3)
    t = s.replace(rotations=s.rotations @ R)
    dO, dW = dyn.rhs_lohe_order2(s, P1)
    dO2, dW2 = dyn.rhs_lohe_order2(t, P1)
    assert np.allclose(dO2, dO @ R, atol=1e-12)
    assert np.allclose(dW2, dW, atol=1e-12)
    assert np.allclose(dyn.rhs_lohe_order1(t, P1), dyn.rhs_lohe_order1(s, P1) @ R, atol=1e-12)


def test_lohe_order1_equal_rotations_rest():
    s = planar_state([0.3] * 4)
    assert np.allclose(dyn.rhs_lohe_order1(s, P1), 0.0, atol=1e-15)


@settings(max_examples=50)
@given(st.lists(st.floats(-np.pi, np.pi), min_size=1, max_size=8), st.floats(0.1, 5.0))
def test_so2_reduces_to_kuramoto(thetas, kappa):
    thetas = np.array(thetas)
    s = planar_state(thetas)
    dO = dyn.rhs_lohe_order1(s, dyn.ModelParams(m=0.0, kappa=kappa))
    # dO = theta_dot J O, so theta_dot is the (1, 0) entry of dO O^T
    induced = (dO @ np.swapaxes(s.rotations, 1, 2))[:, 1, 0]
    N = len(thetas)
    expected = [kappa / N * sum(np.sin(tk - ti) for tk in thetas) for ti in thetas]
    assert np.allclose(induced, expected, atol=1e-12)


def test_similar_equal_scales_matches_order2():
    s = random_state(3, n=4, d=3, scales=np.full(4, 1.7))
    a = dyn.rhs_similar(s, P1)
    b = dyn.rhs_order2(s, P1)
    for name in ("centroids", "velocities", "rotations", "angular"):
        assert np.allclose(getattr(a, name), getattr(b, name), atol=1e-14)


def test_similar_coupling_is_asymmetric():
    s = planar_state([0.0, 1.0])
    s = EnsembleState(s.centroids, s.velocities, s.rotations, s.angular, s.shapes, [1.0, 2.0])
    dW = dyn.rhs_similar(s, P1).angular
    # agent 1 is pulled with weight 2, agent 2 with weight 1/2
    assert not np.allclose(dW[0], -dW[1])
    assert np.allclose(dW[0], -4.0 * dW[1], atol=1e-15)
    with pytest.raises(ValidationError):
        dyn.similarity_weights([1.0, -1.0])


@given(seeds)
def test_similar_angular_derivative_is_skew(seed):
    rng = np.random.default_rng(seed)
    s = random_state(seed, n=5, d=3, scales=rng.uniform(0.2, 5, 5))
    dW = dyn.rhs_similar(s, P1).angular
    assert np.array_equal(dW, -np.swapaxes(dW, 1, 2))


def test_hetero_force_examples():
    assert np.allclose(dyn.hetero_force([0.0, 0.0], [0.0, 1.5], 2.0, 1.5), 0.0)
    assert np.allclose(dyn.hetero_force([0.0, 0.0], [2.0, 0.0], 1.0, 1.0), [1.0, 0.0])
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal((2, 3))
    assert np.allclose(dyn.hetero_force(x, y, 1.3, 0.4), -dyn.hetero_force(y, x, 1.3, 0.4))
    # inside the rest length the force pushes away
    assert dyn.hetero_force([0.0, 0.0], [0.5, 0.0], 1.0, 1.0)[0] < 0


def test_hetero_force_coincident():
    with pytest.warns(CoincidentCentroidsWarning):
        f = dyn.hetero_force([1.0, 1.0], [1.0, 1.0], 1.0, 1.0)
    assert np.array_equal(f, [0.0, 0.0])


def two_species(x, y, d=2, rotations=None):
    shape_a = regular_polygon(3, d=d)
    shape_b = regular_polygon(4, d=d)
    O = np.array([np.eye(d)] * 2) if rotations is None else rotations
    return EnsembleState(np.array([x, y], float), np.zeros((2, d)), O, np.zeros((2, d, d)),
                         (shape_a, shape_b), None, [0, 1])


def test_hetero_examples():
    p = dyn.ModelParams(m=1.0, gamma=1.0, kappa=1.0, kappa2=1.0, L=1.0)
    der = dyn.rhs_hetero(two_species([0.0, 0.0], [3.0, 0.0]), p)
    assert np.allclose(der.velocities, [[2.0, 0.0], [-2.0, 0.0]])
    eq = dyn.rhs_hetero(two_species([0.0, 0.0], [0.0, 1.0]), p)
    for name in ("centroids", "velocities", "rotations", "angular"):
        assert np.allclose(getattr(eq, name), 0.0)


def test_hetero_without_spring_is_juxtaposition():
    a = random_state(1, n=3, d=3)
    b = random_state(2, n=4, d=3)
    both = EnsembleState.concatenate([a, b])
    p = dyn.ModelParams(m=1.5, gamma=0.5, kappa=2.0, kappa2=0.0, L=1.0)
    der = dyn.rhs_hetero(both, p)
    da, db = dyn.rhs_order2(a, p), dyn.rhs_order2(b, p)
    for name in ("centroids", "velocities", "rotations", "angular"):
        assert np.array_equal(getattr(der, name), np.concatenate([getattr(da, name), getattr(db, name)]))


def test_hetero_rejects_wrong_species_count():
    with pytest.raises(ValidationError):
        dyn.rhs_hetero(random_state(0), dyn.ModelParams(kappa2=1.0, L=1.0))


def test_hetero_cross_force_is_mean_of_pair_forces():
    rng = np.random.default_rng(9)
    a = random_state(3, n=2, d=3)
    b = random_state(4, n=3, d=3)
    both = EnsembleState.concatenate([a, b])
    p = dyn.ModelParams(m=2.0, gamma=1.0, kappa=0.0, kappa2=1.5, L=0.7)
    der = dyn.rhs_hetero(both, p)
    base = dyn.rhs_hetero(both, dyn.ModelParams(m=2.0, gamma=1.0, kappa=0.0, kappa2=0.0, L=0.7))
    x, y = a.centroids, b.centroids
    for i in range(2):
        f = np.mean([dyn.hetero_force(x[i], y[l], p.kappa2, p.L) for l in range(3)], axis=0)
        assert np.allclose(der.velocities[i] - base.velocities[i], f / p.m)
    for j in range(3):
        f = np.mean([dyn.hetero_force(y[j], x[k], p.kappa2, p.L) for k in range(2)], axis=0)
        assert np.allclose(der.velocities[2 + j] - base.velocities[2 + j], f / p.m)


def test_model_rhs_rejects_unknown_and_massless():
    with pytest.raises(ValidationError):
        dyn.model_rhs("order3", P1)
    with pytest.raises(ValidationError):
        dyn.model_rhs("order2", dyn.ModelParams(m=0.0))
    with pytest.raises(ValidationError):
        dyn.ModelParams(kappa=-1.0)
