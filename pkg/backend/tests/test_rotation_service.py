import numpy as np
import pytest
from scipy.linalg import expm

from app.models.fields import LieAlgebraField, NormalFrameField, RotationField, TorsionField
from app.services.rotation_service import (
    RotationService,
    exp_so,
    random_initial_rotation,
    random_rotation_field,
    random_skew,
    rotation_from_angle,
)
from tests.helpers import disc_operators, h2


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_exp_so_matches_expm(n, rng):
    a = np.stack([random_skew(n, rng, scale) for scale in (0.1, 1.0, 3.0)])
    expected = np.stack([expm(m) for m in a])
    np.testing.assert_allclose(exp_so(a), expected, atol=1e-12)


def test_exp_so_small_angle_rodrigues(rng):
    a = random_skew(3, rng, 1e-9)
    np.testing.assert_allclose(exp_so(a), np.eye(3) + a, atol=1e-16)


def test_rotation_by_angle_convention():
    rotation = rotation_from_angle(np.array([0.3]), 2)
    c, s = np.cos(0.3), np.sin(0.3)
    np.testing.assert_allclose(rotation.matrices[0], [[c, s], [-s, c]])


def test_rotation_in_chosen_plane():
    rotation = rotation_from_angle(np.array([np.pi / 2]), 3, plane=(1, 2))
    np.testing.assert_allclose(rotation.matrices[0], [[1, 0, 0], [0, 0, 1], [0, -1, 0]], atol=1e-15)
    with pytest.raises(ValueError):
        rotation_from_angle(np.array([0.1]), 2, plane=(0, 2))


def test_random_fields_are_rotations(rng):
    g = disc_operators(16, 32).grid
    for n in (2, 3, 4):
        rotation = random_rotation_field(g.u, g.v, n, rng)
        assert rotation.orthogonality_defect() <= 1e-12
        assert rotation.determinant_defect() <= 1e-12


def test_random_initial_rotation_is_identity_on_boundary(rng):
    g = disc_operators(16, 32).grid
    rotation = random_initial_rotation(g.r, 3, rng, 0.8)
    np.testing.assert_allclose(rotation.matrices[g.boundary_nodes], np.eye(3)[None].repeat(g.n_theta, 0),
                               atol=1e-15)


def test_apply_rotation_mixes_columns(plane32):
    rotations = RotationService(plane32.ops)
    angle = np.full(plane32.ops.grid.n_nodes, 0.4)
    rotated = rotations.apply_rotation(plane32.frame, rotation_from_angle(angle, 2))
    expected_first = np.cos(0.4) * plane32.frame.column(0) + np.sin(0.4) * plane32.frame.column(1)
    np.testing.assert_allclose(rotated.column(0), expected_first, atol=1e-15)


def test_apply_rotation_checks_dimensions(plane32):
    rotations = RotationService(plane32.ops)
    with pytest.raises(ValueError):
        rotations.apply_rotation(plane32.frame, RotationField.identity(plane32.ops.grid.n_nodes, 3))


def test_constant_rotation_conjugates_torsion(graph32, rng):
    rotations = RotationService(graph32.ops)
    matrix = exp_so(random_skew(2, rng, 1.0))
    transformed = rotations.transform_torsion(graph32.torsion, rotations.constant_field(matrix))
    expected = matrix @ graph32.torsion.t1 @ matrix.T
    np.testing.assert_allclose(transformed.t1, expected, atol=1e-12)


def test_transform_torsion_of_angle_field(ops32):
    rotations = RotationService(ops32)
    g = ops32.grid
    zero = TorsionField.zeros(g.n_nodes, 2)
    torsion = rotations.transform_torsion(zero, rotation_from_angle(g.u ** 2 - g.v, 2))
    # T_i = phi_{u^i} J for a pure SO(2) gauge
    np.testing.assert_allclose(torsion.t1[:, 0, 1], 2.0 * g.u, atol=h2(ops32))
    np.testing.assert_allclose(torsion.t2[:, 0, 1], -1.0, atol=h2(ops32))
    np.testing.assert_array_equal(torsion.t1 + np.swapaxes(torsion.t1, -1, -2), 0.0)


def test_transform_torsion_matches_torsion_of_rotated_frame(graph32, rng):
    geometry = graph32.descent.geometry
    rotations = graph32.descent.rotations
    g = graph32.ops.grid
    rotation = random_rotation_field(g.u, g.v, 2, rng, 0.5)
    direct = geometry.torsion_of_frame(rotations.apply_rotation(graph32.frame, rotation))
    transformed = rotations.transform_torsion(graph32.torsion, rotation)
    assert np.max(np.abs(direct.t1 - transformed.t1)) <= h2(graph32.ops)
    assert np.max(np.abs(direct.t2 - transformed.t2)) <= h2(graph32.ops)


def test_left_update(ops32, rng):
    rotations = RotationService(ops32)
    g = ops32.grid
    rotation = random_rotation_field(g.u, g.v, 3, rng)
    zero = LieAlgebraField(np.zeros((g.n_nodes, 3, 3)))
    np.testing.assert_allclose(rotations.left_update(rotation, zero, 1.0).matrices, rotation.matrices)

    direction = LieAlgebraField(np.broadcast_to(random_skew(3, rng), (g.n_nodes, 3, 3)))
    updated = rotations.left_update(rotation, direction, 0.25)
    np.testing.assert_allclose(updated.matrices, expm(-0.25 * direction.matrices[0]) @ rotation.matrices,
                               atol=1e-12)


def test_twist_rotates_plane_frame(plane32):
    rotations = RotationService(plane32.ops)
    g = plane32.ops.grid
    twisted = rotations.twist(plane32.frame, g.u)
    assert isinstance(twisted, NormalFrameField)
    np.testing.assert_allclose(twisted.column(0)[:, 2], np.cos(g.u), atol=1e-15)
    np.testing.assert_allclose(twisted.column(0)[:, 3], np.sin(g.u), atol=1e-15)
