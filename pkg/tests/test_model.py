import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazefit.model import (
    EyeRegionMesh,
    LinearBasis,
    PoseParams,
    SyntheticBasisConfig,
    apply_pose,
    eyeball_centres,
    reconstruct_color,
    reconstruct_shape,
    rodrigues,
    rotate_eyeballs,
    synthetic_basis,
)

vec3 = st.lists(st.floats(-np.pi, np.pi, allow_nan=False), min_size=3, max_size=3).map(np.array)


def tiny_basis(eyeball_left=(0,), eyeball_right=(1,)):
    n = 40
    rng = np.random.default_rng(0)
    return LinearBasis(
        mean_shape=rng.normal(size=(n, 3)),
        shape_components=rng.normal(size=(2, n, 3)),
        mean_color=rng.uniform(size=(n, 3)),
        color_components=rng.normal(size=(1, n, 3)),
        faces=[[0, 1, 2]],
        landmark_indices=np.arange(31),
        left_eyeball_indices=list(eyeball_left),
        right_eyeball_indices=list(eyeball_right),
        left_eye_outer_corner=2,
        right_eye_outer_corner=3,
    )


class TestBasis:
    def test_rejects_bad_indices(self):
        with pytest.raises(ValueError):
            tiny_basis(eyeball_left=(0, 50))

    def test_rejects_overlapping_eyeballs(self):
        with pytest.raises(ValueError):
            tiny_basis(eyeball_left=(0, 1), eyeball_right=(1, 2))

    def test_arrays_read_only(self, basis):
        with pytest.raises(ValueError):
            basis.mean_shape[0, 0] = 1.0

    def test_synthetic_is_deterministic(self):
        a, b = synthetic_basis(seed=5), synthetic_basis(seed=5)
        assert a.equals(b)
        assert not a.equals(synthetic_basis(seed=6))

    def test_synthetic_layout(self, basis):
        assert basis.landmark_indices.shape == (31,)
        assert len(basis.left_eyeball_indices) >= 16 and len(basis.right_eyeball_indices) >= 16
        assert basis.n_shape >= 2
        assert basis.faces.max() < basis.n_vertices

    def test_interocular_mode_widens(self, basis):
        def iod(z):
            o_l, o_r = eyeball_centres(reconstruct_shape(basis, z), basis)
            return np.linalg.norm(o_l - o_r)

        e1 = np.eye(basis.n_shape)[0]
        assert iod(e1) > iod(np.zeros(basis.n_shape))

    def test_radius_mode_grows_eyeballs(self, basis):
        def radius(z):
            v = reconstruct_shape(basis, z).vertices[basis.left_eyeball_indices]
            return np.linalg.norm(v - v.mean(axis=0), axis=1).mean()

        assert radius(np.eye(basis.n_shape)[1]) > radius(np.zeros(basis.n_shape))

    def test_rejects_too_few_components(self):
        with pytest.raises(ValueError):
            synthetic_basis(SyntheticBasisConfig(n_shape=1))


class TestReconstruction:
    def test_zero_is_mean(self, basis):
        assert np.array_equal(reconstruct_shape(basis, np.zeros(basis.n_shape)).vertices, basis.mean_shape)
        assert np.array_equal(reconstruct_color(basis, np.zeros(basis.n_color)), basis.mean_color)

    def test_unit_coefficient(self, basis):
        e1 = np.eye(basis.n_shape)[0]
        np.testing.assert_allclose(
            reconstruct_shape(basis, e1).vertices, basis.mean_shape + basis.shape_components[0], rtol=0, atol=1e-15
        )
        c1 = np.eye(basis.n_color)[0]
        np.testing.assert_allclose(reconstruct_color(basis, c1), basis.mean_color + basis.color_components[0], atol=1e-15)

    def test_linearity(self, basis, rng):
        a, b = rng.normal(size=(2, basis.n_shape))
        lhs = reconstruct_shape(basis, a).vertices + reconstruct_shape(basis, b).vertices - basis.mean_shape
        np.testing.assert_allclose(lhs, reconstruct_shape(basis, a + b).vertices, atol=1e-14)
        ca, cb = rng.normal(size=(2, basis.n_color))
        lhs = reconstruct_color(basis, ca) + reconstruct_color(basis, cb) - basis.mean_color
        np.testing.assert_allclose(lhs, reconstruct_color(basis, ca + cb), atol=1e-14)

    def test_jacobian_is_components(self, basis, rng):
        z = rng.normal(size=basis.n_shape)
        h = 1e-6
        for k in range(basis.n_shape):
            dz = np.zeros_like(z)
            dz[k] = h
            fd = (reconstruct_shape(basis, z + dz).vertices - reconstruct_shape(basis, z - dz).vertices) / (2 * h)
            np.testing.assert_allclose(fd, basis.shape_components[k], atol=1e-8)

    def test_color_clamp_only_on_request(self, basis):
        big = np.full(basis.n_color, 50.0)
        raw = reconstruct_color(basis, big)
        assert raw.max() > 1 or raw.min() < 0
        clamped = reconstruct_color(basis, big, clamp=True)
        assert clamped.min() >= 0 and clamped.max() <= 1

    def test_dimension_mismatch(self, basis):
        with pytest.raises(ValueError):
            reconstruct_shape(basis, np.zeros(basis.n_shape + 1))
        with pytest.raises(ValueError):
            reconstruct_color(basis, np.zeros(basis.n_color + 1))


class TestRodrigues:
    def test_examples(self):
        np.testing.assert_array_equal(rodrigues([0, 0, 0]), np.eye(3))
        np.testing.assert_allclose(rodrigues([0, np.pi / 2, 0]) @ [0, 0, 1], [1, 0, 0], atol=1e-15)
        np.testing.assert_allclose(rodrigues([np.pi, 0, 0]), np.diag([1, -1, -1]), atol=1e-15)

    def test_continuous_at_zero(self):
        u = np.array([1.0, 2.0, -2.0]) / 3.0
        assert np.abs(rodrigues(1e-10 * u) - np.eye(3)).max() < 1e-9
        # both sides of the series threshold agree
        below, above = rodrigues(0.99e-8 * u), rodrigues(1.01e-8 * u)
        assert np.abs(below - above).max() < 1e-9

    @settings(max_examples=200, deadline=None)
    @given(vec3)
    def test_orthonormal(self, r):
        R = rodrigues(r)
        assert np.abs(R.T @ R - np.eye(3)).max() < 1e-12
        assert abs(np.linalg.det(R) - 1) < 1e-12

    @settings(max_examples=100, deadline=None)
    @given(vec3)
    def test_axis_fixed(self, r):
        R = rodrigues(r)
        np.testing.assert_allclose(R @ r, r, atol=1e-12)


class TestPose:
    def test_examples(self, basis):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        v = mesh.vertices
        np.testing.assert_array_equal(apply_pose(mesh, PoseParams(np.zeros(3), np.zeros(3), 1.0)).vertices, v)
        np.testing.assert_array_equal(apply_pose(mesh, PoseParams(np.zeros(3), np.zeros(3), 2.0)).vertices, 2 * v)
        moved = apply_pose(mesh, PoseParams(np.zeros(3), [0, 0, 1.0], 1.0)).vertices
        np.testing.assert_allclose(moved - v, np.tile([0, 0, 1.0], (len(v), 1)), atol=1e-15)

    def test_frame_tags(self, basis):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        posed = apply_pose(mesh, PoseParams(np.zeros(3), np.zeros(3)))
        assert (mesh.frame, posed.frame) == ("model", "camera")
        with pytest.raises(ValueError):
            apply_pose(posed, PoseParams(np.zeros(3), np.zeros(3)))

    def test_nonpositive_scale(self):
        with pytest.raises(ValueError):
            PoseParams(np.zeros(3), np.zeros(3), 0.0)
        with pytest.raises(ValueError):
            PoseParams(np.zeros(3), np.zeros(3), -1.0)

    @settings(max_examples=50, deadline=None)
    @given(vec3, st.floats(0.2, 5.0))
    def test_distances_scale_by_f(self, basis, r, f):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        posed = apply_pose(mesh, PoseParams(r, [0.1, -0.2, 1.0], f)).vertices
        i, j = np.arange(0, 300, 7), np.arange(5, 305, 7)
        d0 = np.linalg.norm(mesh.vertices[i] - mesh.vertices[j], axis=1)
        d1 = np.linalg.norm(posed[i] - posed[j], axis=1)
        np.testing.assert_allclose(d1, f * d0, rtol=1e-9)


class TestEyeballs:
    def test_centres_equivariant(self, basis):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        T = np.array([0.3, -0.1, 0.9])
        moved = apply_pose(mesh, PoseParams(np.zeros(3), T))
        for a, b in zip(eyeball_centres(mesh, basis), eyeball_centres(moved, basis)):
            np.testing.assert_allclose(b, a + T, atol=1e-15)

    def test_single_vertex_set(self):
        b = tiny_basis()
        mesh = EyeRegionMesh(b.mean_shape, frame="camera")
        o_l, o_r = eyeball_centres(mesh, b)
        assert np.array_equal(o_l, b.mean_shape[0]) and np.array_equal(o_r, b.mean_shape[1])

    def test_symmetric_sphere_centroid(self):
        c = np.array([0.1, -0.2, 0.7])
        pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]) * 0.25
        n = 40
        shape = np.zeros((n, 3))
        shape[:6] = c + pts
        b = LinearBasis(
            shape, np.zeros((0, n, 3)), np.zeros((n, 3)), np.zeros((0, n, 3)), [[0, 1, 2]],
            np.arange(31), np.arange(6), [6], 7, 8,
        )
        np.testing.assert_allclose(eyeball_centres(EyeRegionMesh(shape, frame="camera"), b)[0], c, atol=1e-15)

    def test_identity_rotation(self, basis):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        out = rotate_eyeballs(mesh, basis, np.eye(3), np.eye(3))
        np.testing.assert_allclose(out.vertices, mesh.vertices, atol=1e-16)

    @settings(max_examples=50, deadline=None)
    @given(vec3, vec3)
    def test_rotation_keeps_centres_and_radii(self, basis, r_l, r_r):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        out = rotate_eyeballs(mesh, basis, rodrigues(r_l), rodrigues(r_r))
        for before, after in zip(eyeball_centres(mesh, basis), eyeball_centres(out, basis)):
            np.testing.assert_allclose(after, before, atol=1e-12)
        others = np.setdiff1d(np.arange(basis.n_vertices), np.r_[basis.left_eyeball_indices, basis.right_eyeball_indices])
        assert np.array_equal(out.vertices[others], mesh.vertices[others])
        for idx in (basis.left_eyeball_indices, basis.right_eyeball_indices):
            c = mesh.vertices[idx].mean(axis=0)
            np.testing.assert_allclose(
                np.linalg.norm(out.vertices[idx] - c, axis=1), np.linalg.norm(mesh.vertices[idx] - c, axis=1), atol=1e-9
            )

    def test_quarter_turn(self, basis):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        idx = basis.left_eyeball_indices
        c = mesh.vertices[idx].mean(axis=0)
        rel = mesh.vertices[idx] - c
        front = idx[np.argmax(rel[:, 2])]
        rho = (mesh.vertices[front] - c)[2]
        out = rotate_eyeballs(mesh, basis, rodrigues([0, np.pi / 2, 0]), np.eye(3))
        np.testing.assert_allclose(out.vertices[front], c + [rho, 0, 0], atol=1e-12)

    def test_rejects_non_rotation(self, basis):
        mesh = reconstruct_shape(basis, np.zeros(basis.n_shape))
        with pytest.raises(ValueError):
            rotate_eyeballs(mesh, basis, np.diag([1, 1, -1.0]), np.eye(3))
        with pytest.raises(ValueError):
            rotate_eyeballs(mesh, basis, np.eye(3) * 1.001, np.eye(3))
