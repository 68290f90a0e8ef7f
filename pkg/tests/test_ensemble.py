import numpy as np
import pytest

from shapesync import matso
from shapesync.ensemble import (
    AgentState,
    EnsembleState,
    ReferenceShape,
    VertexCloud,
    centroid,
    check_congruence,
    extract_reference,
    general_position_check,
    reconstruct,
    reconstruct_all,
    regular_polygon,
    regular_simplex,
)
from shapesync.errors import ValidationError

TRI = np.array([[0.0, 0.0], [2.0, 0.0], [1.0, 3.0]])


def agent(c, O, scale=1.0):
    d = len(c)
    return AgentState(np.asarray(c, float), np.zeros(d), O, np.zeros((d, d)), scale)


def test_centroid_examples():
    assert np.array_equal(centroid(VertexCloud([[3.0, -1.0]])), [3.0, -1.0])
    assert np.allclose(centroid(VertexCloud(TRI)), [1.0, 1.0])
    t = np.array([5.0, -2.0])
    assert np.allclose(centroid(VertexCloud(TRI + t)), [1.0, 1.0] + t)
    with pytest.raises(ValidationError):
        centroid(np.zeros((0, 2)))


def test_reference_shape_requires_zero_sum():
    with pytest.raises(ValidationError):
        ReferenceShape([[1.0, 0.0], [0.0, 1.0]])


def test_reconstruct_examples():
    shape = ReferenceShape.from_vertices(TRI)
    x = reconstruct(agent([0, 0], np.eye(2)), shape).vertices
    assert np.allclose(x, shape.displacements)
    t = np.array([3.0, 4.0])
    y = reconstruct(agent(t, np.eye(2)), shape).vertices
    assert np.allclose(y - x, t)
    z = reconstruct(agent([1.0, -1.0], matso.rotation_2d(np.pi / 2)), shape).vertices
    r = shape.displacements
    assert np.allclose(z, np.column_stack([-r[:, 1], r[:, 0]]) + [1.0, -1.0], atol=1e-14)
    with pytest.raises(ValidationError):
        reconstruct(agent([0, 0, 0], np.eye(3)), shape)


def test_reconstruct_scale():
    shape = regular_polygon(4)
    x = reconstruct(agent([0, 0], np.eye(2), scale=2.0), shape).vertices
    assert np.allclose(x, 2 * shape.displacements)


def test_check_congruence():
    a = VertexCloud(TRI)
    R = matso.rotation_2d(0.7)
    b = VertexCloud(TRI @ R.T + [4.0, -3.0])
    assert check_congruence([a, a])
    assert check_congruence([a, b])
    tol = 1e-8
    bad = TRI.copy()
    bad[2, 0] += 10 * tol
    assert not check_congruence([a, VertexCloud(bad)], tol)
    with pytest.raises(ValidationError):
        check_congruence([a, VertexCloud(TRI, labels=("a", "b", "c"))])


def test_extract_identical_clouds():
    shape, rots, cents = extract_reference([VertexCloud(TRI)] * 3)
    for O in rots:
        assert np.allclose(O, np.eye(2))
    for c in cents:
        assert np.allclose(c, [1.0, 1.0])


def test_extract_recovers_known_rotation():
    rng = np.random.default_rng(3)
    base = rng.standard_normal((5, 3))
    R = matso.random_rotation(11, 3)
    c = base.mean(axis=0)
    moved = (base - c) @ R.T + c
    _, rots, _ = extract_reference([VertexCloud(base), VertexCloud(moved)])
    assert matso.frobenius_distance(rots[1], R) <= 1e-10


def test_extract_rejects_scaled_cloud():
    with pytest.raises(ValidationError, match="cloud 1"):
        extract_reference([VertexCloud(TRI), VertexCloud(2 * TRI)])


def test_extract_rejects_mirror_image():
    mirrored = TRI * [-1.0, 1.0]
    with pytest.raises(ValidationError, match="not reachable by rotation"):
        extract_reference([VertexCloud(TRI), VertexCloud(mirrored)])


@pytest.mark.parametrize("d", [2, 3, 4])
def test_round_trip_random_rotations(d):
    rng = np.random.default_rng(d)
    shape = ReferenceShape.from_vertices(rng.standard_normal((d + 3, d)))
    assert general_position_check(shape)
    true_O = [np.eye(d)] + [matso.random_rotation(rng, d) for _ in range(6)]
    centres = rng.uniform(-5, 5, (7, d))
    clouds = [reconstruct(agent(c, O), shape) for c, O in zip(centres, true_O)]
    ref, rots, cents = extract_reference(clouds)
    for O_rec, O in zip(rots, true_O):
        assert matso.frobenius_distance(O_rec, O) <= 1e-8
    for cloud, O, c in zip(clouds, rots, cents):
        rebuilt = reconstruct(agent(c, O), ref).vertices
        assert np.max(np.abs(rebuilt - cloud.vertices)) <= 1e-9


def test_reconstruct_preserves_rigidity():
    rng = np.random.default_rng(8)
    shape = regular_simplex(3)
    r = shape.displacements
    ref = np.linalg.norm(r[:, None] - r[None], axis=-1)
    for _ in range(20):
        s = rng.uniform(0.5, 3)
        x = reconstruct(agent(rng.uniform(-10, 10, 3), matso.random_rotation(rng, 3), s), shape).vertices
        dist = np.linalg.norm(x[:, None] - x[None], axis=-1)
        assert np.max(np.abs(dist - s * ref)) <= 1e-12 * max(1.0, s * ref.max())


def test_general_position():
    assert general_position_check(regular_polygon(3))
    flat = regular_polygon(4, d=3)
    assert not general_position_check(flat)
    assert not general_position_check(ReferenceShape([[1.0, 0.0], [-1.0, 0.0]]))
    assert general_position_check(regular_simplex(4))


def test_regular_simplex_is_regular():
    r = regular_simplex(3, circumradius=2.0).displacements
    assert np.allclose(np.linalg.norm(r, axis=1), 2.0)
    D = np.linalg.norm(r[:, None] - r[None], axis=-1)
    off = D[~np.eye(4, dtype=bool)]
    assert np.allclose(off, off[0])


def test_reconstruct_all_matches_per_agent(make_state):
    s = make_state(0, n=5, d=3)
    s = s.replace()
    x = reconstruct_all(s)
    for i, a in enumerate(s.agents):
        assert np.allclose(x[i], reconstruct(a, s.shape).vertices, atol=1e-14)


def test_agent_state_invariants():
    with pytest.raises(ValidationError):
        agent([0, 0], np.diag([1.0, -1.0]))
    with pytest.raises(ValidationError):
        AgentState(np.zeros(2), np.zeros(2), np.eye(2), np.ones((2, 2)))
    with pytest.raises(ValidationError):
        agent([0, 0], np.eye(2), scale=0.0)


def test_ensemble_state_validation():
    shape = regular_polygon(3)
    with pytest.raises(ValidationError):
        EnsembleState(np.zeros((2, 2)), np.zeros((2, 3)), np.stack([np.eye(2)] * 2), np.zeros((2, 2, 2)), (shape,))
    with pytest.raises(ValidationError):
        EnsembleState(np.zeros((2, 3)), np.zeros((2, 3)), np.stack([np.eye(3)] * 2), np.zeros((2, 3, 3)), (shape,))
    s = EnsembleState(np.zeros((2, 2)), np.zeros((2, 2)), np.stack([np.eye(2)] * 2), np.zeros((2, 2, 2)), shape)
    assert s.n_agents == 2 and s.dim == 2
    with pytest.raises(ValidationError):
        s.replace(centroids=np.zeros((3, 2)))
