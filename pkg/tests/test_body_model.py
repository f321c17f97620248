import numpy as np
import pytest

from aionfit.body_model import (
    BodyModelData,
    MeshResult,
    PoseParams,
    ShapeParams,
    forward,
    interpolate_template,
    neutral_height,
    rest_joints,
    shape_offset,
    world_joints,
)
from aionfit.errors import ModelError
from aionfit.rotation import axis_angle_to_matrix

from helpers import make_toy_chain, naive_forward


def zero_pose(model):
    return PoseParams.identity(model.joint_count)


# ----------------------------------------------------------------------
# Template interpolation
# ----------------------------------------------------------------------


def test_interpolation_endpoints_are_bit_exact(humanoid):
    assert np.array_equal(interpolate_template(humanoid, 0.0), humanoid.adult_template)
    assert np.array_equal(interpolate_template(humanoid, 1.0), humanoid.child_template)


def test_interpolation_midpoint(tall_pair):
    blended = interpolate_template(tall_pair, 0.5)
    assert np.allclose(blended[1], [0.0, 1.1, 0.0], atol=1e-15)


def test_interpolation_rejects_out_of_range(humanoid):
    with pytest.raises(ValueError):
        interpolate_template(humanoid, -0.01)
    with pytest.raises(ValueError):
        interpolate_template(humanoid, 1.01)


# ----------------------------------------------------------------------
# Shape offsets
# ----------------------------------------------------------------------


def test_shape_offset_zero_and_basis(humanoid):
    assert np.array_equal(shape_offset(humanoid, np.zeros(10)), np.zeros((humanoid.vertex_count, 3)))
    basis = np.zeros(10)
    basis[0] = 1.0
    assert np.array_equal(shape_offset(humanoid, basis), humanoid.shape_blendshapes[:, :, 0])


def test_shape_offset_matches_loop_oracle(humanoid):
    rng = np.random.default_rng(3)
    betas = rng.normal(size=10)
    expected = np.zeros((humanoid.vertex_count, 3))
    for v in range(humanoid.vertex_count):
        for d in range(3):
            for k in range(10):
                expected[v, d] += humanoid.shape_blendshapes[v, d, k] * betas[k]
    assert np.allclose(shape_offset(humanoid, betas), expected, atol=1e-14)


# ----------------------------------------------------------------------
# Forward pass
# ----------------------------------------------------------------------


def test_identity_pose_reproduces_template(humanoid):
    mesh = forward(humanoid, ShapeParams(np.zeros(10), 0.0), zero_pose(humanoid))
    assert np.array_equal(mesh.vertices, humanoid.adult_template)
    mesh = forward(humanoid, ShapeParams(np.zeros(10), 1.0), zero_pose(humanoid))
    assert np.array_equal(mesh.vertices, humanoid.child_template)


def _two_joint_chain():
    # Child joint regressed at the parent's location, so rotating the child
    # pivots the child-weighted vertex about the parent joint position.
    return BodyModelData(
        name="two-joint",
        up_axis="y",
        joint_names=("root", "limb"),
        parents=np.array([-1, 0]),
        adult_template=np.array(
            [[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0], [0.1, 0.0, 0.0], [-0.1, 0.0, 0.0], [0.0, 1.0, 0.0]]
        ),
        child_template=np.array(
            [[0.05, 0.0, 0.0], [-0.05, 0.0, 0.0], [0.05, 0.0, 0.0], [-0.05, 0.0, 0.0], [0.0, 0.5, 0.0]]
        ),
        shape_blendshapes=np.zeros((5, 3, 10)),
        joint_regressor=np.array([[0.5, 0.5, 0.0, 0.0, 0.0], [0.0, 0.0, 0.5, 0.5, 0.0]]),
        skinning_weights=np.array(
            [[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]]
        ),
        faces=np.zeros((0, 3), dtype=int),
    )


def test_two_joint_chain_rotates_about_parent_joint():
    model = _two_joint_chain()
    pose = PoseParams(np.zeros(3), np.array([[0.0, 0.0, np.pi / 2]]))
    mesh = forward(model, ShapeParams(np.zeros(10), 0.0), pose)
    # Hand-computed: the limb-weighted vertex at (0, 1, 0) swings to (-1, 0, 0)
    # about the parent joint at the origin.
    assert np.allclose(mesh.vertices[4], [-1.0, 0.0, 0.0], atol=1e-12)
    assert np.allclose(mesh.joints[1], [0.0, 0.0, 0.0], atol=1e-12)


def test_root_only_weights_give_rigid_rotation():
    rng = np.random.default_rng(4)
    model = make_toy_chain(11)
    weights = np.zeros_like(model.skinning_weights)
    weights[:, 0] = 1.0
    model = BodyModelData(
        name=model.name,
        up_axis=model.up_axis,
        joint_names=model.joint_names,
        parents=model.parents,
        adult_template=model.adult_template,
        child_template=model.child_template,
        shape_blendshapes=model.shape_blendshapes,
        joint_regressor=model.joint_regressor,
        skinning_weights=weights,
        faces=model.faces,
    )
    for _ in range(5):
        orient = rng.normal(scale=1.0, size=3)
        pose = PoseParams(orient, rng.normal(scale=0.8, size=(model.joint_count, 3)))
        mesh = forward(model, ShapeParams(np.zeros(10), 0.0), pose)
        rigid = model.adult_template @ axis_angle_to_matrix(orient).T
        assert np.allclose(mesh.vertices, rigid, atol=1e-10)


@pytest.mark.parametrize("seed", range(5))
def test_forward_matches_naive_loop_oracle(seed):
    model = make_toy_chain(seed)
    rng = np.random.default_rng(100 + seed)
    for _ in range(10):
        shape = ShapeParams(rng.normal(scale=0.5, size=10), float(rng.uniform(0, 1)))
        pose = PoseParams(
            rng.normal(scale=0.7, size=3), rng.normal(scale=0.5, size=(model.joint_count, 3))
        )
        mesh = forward(model, shape, pose)
        ref_vertices, ref_joints = naive_forward(model, shape, pose)
        assert np.allclose(mesh.vertices, ref_vertices, atol=1e-10)
        assert np.allclose(mesh.joints, ref_joints, atol=1e-10)


def test_pose_blendshapes_vanish_at_identity():
    base = make_toy_chain(5)
    rng = np.random.default_rng(5)
    pose_dirs = 0.05 * rng.standard_normal((base.vertex_count, 3, 9 * base.joint_count))
    model = BodyModelData(
        name="with-posedirs",
        up_axis="y",
        joint_names=base.joint_names,
        parents=base.parents,
        adult_template=base.adult_template,
        child_template=base.child_template,
        shape_blendshapes=base.shape_blendshapes,
        joint_regressor=base.joint_regressor,
        skinning_weights=base.skinning_weights,
        faces=base.faces,
        pose_blendshapes=pose_dirs,
    )
    mesh = forward(model, ShapeParams(np.zeros(10), 0.0), zero_pose(model))
    # Random convex skinning rows sum to 1 only within rounding, so identity
    # is exact to machine precision here; bit-exactness is asserted on the
    # humanoid whose weight rows are one-hot.
    assert np.allclose(mesh.vertices, model.adult_template, atol=1e-12)
    # and the offsets participate away from identity, matching the loop oracle
    pose = PoseParams(np.zeros(3), rng.normal(scale=0.4, size=(model.joint_count, 3)))
    mesh = forward(model, ShapeParams(np.zeros(10), 0.0), pose)
    ref_vertices, _ = naive_forward(model, ShapeParams(np.zeros(10), 0.0), pose)
    assert np.allclose(mesh.vertices, ref_vertices, atol=1e-10)


def test_forward_rejects_wrong_pose_width(humanoid):
    with pytest.raises(ModelError):
        forward(
            humanoid,
            ShapeParams(np.zeros(10), 0.0),
            PoseParams(np.zeros(3), np.zeros((humanoid.joint_count + 1, 3))),
        )


def test_root_joint_equals_rotated_rest_root(humanoid):
    orient = np.array([0.4, -0.3, 0.2])
    mesh = forward(
        humanoid,
        ShapeParams(np.zeros(10), 0.0),
        PoseParams(orient, np.zeros((humanoid.joint_count, 3))),
    )
    root_rest = rest_joints(humanoid, 0.0, np.zeros(10))[0]
    assert np.allclose(mesh.joints[0], axis_angle_to_matrix(orient) @ root_rest, atol=1e-12)


# ----------------------------------------------------------------------
# World joints and height
# ----------------------------------------------------------------------


def test_world_joints_shift_and_inverse(humanoid):
    mesh = forward(humanoid, ShapeParams(np.zeros(10), 0.5), zero_pose(humanoid))
    assert np.array_equal(world_joints(mesh, np.zeros(3)), mesh.joints)
    shifted = world_joints(mesh, np.array([0.0, 0.0, 2.0]))
    assert np.allclose(shifted[:, 2] - mesh.joints[:, 2], 2.0, atol=1e-15)
    rng = np.random.default_rng(6)
    gamma = rng.normal(size=3)
    assert np.allclose(world_joints(mesh, gamma) - gamma, mesh.joints, atol=1e-12)


def test_neutral_height_examples(tall_pair):
    assert neutral_height(tall_pair, ShapeParams(np.zeros(10), 0.0)) == pytest.approx(1.7)
    assert neutral_height(tall_pair, ShapeParams(np.zeros(10), 1.0)) == pytest.approx(0.5)
    assert neutral_height(tall_pair, ShapeParams(np.zeros(10), 0.5)) == pytest.approx(1.1)


def test_neutral_height_monotone_in_blend(humanoid):
    heights = [
        neutral_height(humanoid, ShapeParams(np.zeros(10), a)) for a in np.linspace(0, 1, 11)
    ]
    assert all(later < earlier for earlier, later in zip(heights, heights[1:]))


# ----------------------------------------------------------------------
# Validation
# ----------------------------------------------------------------------


def test_model_validation_rejects_bad_weights(humanoid):
    bad = humanoid.skinning_weights.copy()
    bad[0] *= 2.0
    with pytest.raises(ModelError):
        BodyModelData(
            name="bad",
            up_axis="y",
            joint_names=humanoid.joint_names,
            parents=humanoid.parents,
            adult_template=humanoid.adult_template,
            child_template=humanoid.child_template,
            shape_blendshapes=humanoid.shape_blendshapes,
            joint_regressor=humanoid.joint_regressor,
            skinning_weights=bad,
            faces=humanoid.faces,
        )


def test_model_validation_rejects_orphan_joint(humanoid):
    parents = humanoid.parents.copy()
    parents[3] = 3  # self-parent
    with pytest.raises(ModelError):
        BodyModelData(
            name="bad",
            up_axis="y",
            joint_names=humanoid.joint_names,
            parents=parents,
            adult_template=humanoid.adult_template,
            child_template=humanoid.child_template,
            shape_blendshapes=humanoid.shape_blendshapes,
            joint_regressor=humanoid.joint_regressor,
            skinning_weights=humanoid.skinning_weights,
            faces=humanoid.faces,
        )


def test_shape_params_clamp_and_vector():
    shape = ShapeParams(np.arange(10, dtype=float), 1.4)
    assert shape.kid_factor == 1.0
    assert shape.as_vector().shape == (11,)
    assert shape.as_vector()[10] == 1.0
    with pytest.raises(ValueError):
        ShapeParams(np.full(10, np.nan), 0.2)
