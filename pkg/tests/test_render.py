"""Software renderer: camera validation, shading, depth, texture sampling."""
import numpy as np
import pytest

from pointbake.assets import TriangleMesh, new_texel_grid
from pointbake.errors import ConfigError
from pointbake.render import Camera, render

LIGHT_DOWN_Z = (0.0, 0.0, -1.0)


def cam(**kw):
    base = dict(
        position=(0.0, 0.0, 5.0),
        look_at=(0.0, 0.0, 0.0),
        up=(0.0, 1.0, 0.0),
        fov_deg=60.0,
        width=64,
        height=64,
    )
    base.update(kw)
    return Camera(**base)


def big_triangle(colors=None, normals=None, uvs=None):
    """One triangle at z=0 large enough to cover the whole test frustum."""
    verts = np.array([[-100.0, -100.0, 0.0], [100.0, -100.0, 0.0], [0.0, 150.0, 0.0]])
    faces = np.array([[0, 1, 2]])
    return TriangleMesh(vertices=verts, faces=faces, colors=colors, normals=normals, uvs=uvs)


UP_NORMALS = np.tile([0.0, 0.0, 1.0], (3, 1))


class TestCamera:
    def test_position_equals_look_at_rejected(self):
        with pytest.raises(ConfigError):
            Camera(position=(1.0, 2.0, 3.0), look_at=(1.0, 2.0, 3.0))

    @pytest.mark.parametrize("fov", [0.0, 180.0, -10.0, 360.0])
    def test_bad_fov_rejected(self, fov):
        with pytest.raises(ConfigError):
            cam(fov_deg=fov)

    def test_bad_planes_rejected(self):
        with pytest.raises(ConfigError):
            cam(near=0.0)
        with pytest.raises(ConfigError):
            cam(near=2.0, far=1.0)

    def test_bad_size_rejected(self):
        with pytest.raises(ConfigError):
            cam(width=0)

    def test_basis_orthonormal(self):
        f, s, u = cam().basis()
        for v in (f, s, u):
            assert np.linalg.norm(v) == pytest.approx(1.0)
        assert abs(f @ s) < 1e-12 and abs(f @ u) < 1e-12 and abs(s @ u) < 1e-12

    def test_up_parallel_to_view_falls_back(self):
        c = Camera(position=(0.0, 0.0, 5.0), look_at=(0.0, 0.0, 0.0), up=(0.0, 0.0, 1.0))
        f, s, u = c.basis()
        assert np.linalg.norm(s) == pytest.approx(1.0)
        assert abs(f @ s) < 1e-12


class TestShading:
    def test_facing_light_full_brightness(self):
        mesh = big_triangle(normals=UP_NORMALS)
        frame = render(mesh, None, None, cam(), LIGHT_DOWN_Z)
        assert frame.color.coverage.all()
        assert (frame.color.data == 255).all()

    def test_white_texture_facing_light(self):
        tex = new_texel_grid(8)
        tex.data.fill(255)
        tex.coverage.fill(True)
        uvs = np.array([[[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]]])
        mesh = big_triangle(normals=UP_NORMALS, uvs=uvs)
        frame = render(mesh, tex, None, cam(), LIGHT_DOWN_Z)
        assert frame.color.coverage.all()
        assert (frame.color.data == 255).all()

    def test_normal_perpendicular_to_light_is_ambient(self):
        mesh = big_triangle(normals=UP_NORMALS)
        frame = render(mesh, None, None, cam(), (1.0, 0.0, 0.0))
        assert frame.color.coverage.all()
        assert np.abs(frame.color.data.astype(int) - 51).max() <= 1

    def test_light_vector_is_normalized(self):
        mesh = big_triangle(normals=UP_NORMALS)
        a = render(mesh, None, None, cam(), (0.0, 0.0, -1.0))
        b = render(mesh, None, None, cam(), (0.0, 0.0, -25.0))
        assert (a.color.data == b.color.data).all()

    def test_vertex_colors_shaded(self):
        colors = np.tile([100.0, 150.0, 200.0], (3, 1))
        mesh = big_triangle(colors=colors, normals=UP_NORMALS)
        frame = render(mesh, None, None, cam(), LIGHT_DOWN_Z)
        covered = frame.color.data[frame.color.coverage]
        assert (covered == np.array([100, 150, 200], dtype=np.uint8)).all()

    def test_normal_away_from_light_gets_ambient_floor(self):
        down = np.tile([0.0, 0.0, -1.0], (3, 1))
        mesh = big_triangle(normals=down)
        frame = render(mesh, None, None, cam(), LIGHT_DOWN_Z)
        assert np.abs(frame.color.data.astype(int) - 51).max() <= 1


class TestDepth:
    def test_near_triangle_occludes_far(self):
        verts = np.array(
            [
                [-50.0, -50.0, 0.0], [50.0, -50.0, 0.0], [0.0, 75.0, 0.0],
                [-0.3, -0.3, 2.5], [0.3, -0.3, 2.5], [0.0, 0.45, 2.5],
            ]
        )
        faces = np.array([[0, 1, 2], [3, 4, 5]])
        colors = np.array([[0.0, 0.0, 255.0]] * 3 + [[255.0, 0.0, 0.0]] * 3)
        normals = np.tile([0.0, 0.0, 1.0], (6, 1))
        mesh = TriangleMesh(vertices=verts, faces=faces, colors=colors, normals=normals)
        frame = render(mesh, None, None, cam(), LIGHT_DOWN_Z)
        assert tuple(frame.color.data[32, 32]) == (255, 0, 0)
        assert tuple(frame.color.data[2, 32]) == (0, 0, 255)
        # swapping face order must not change who wins
        mesh2 = TriangleMesh(
            vertices=verts, faces=faces[::-1].copy(), colors=colors, normals=normals
        )
        frame2 = render(mesh2, None, None, cam(), LIGHT_DOWN_Z)
        assert tuple(frame2.color.data[32, 32]) == (255, 0, 0)

    def test_depth_values(self):
        mesh = big_triangle(normals=UP_NORMALS)
        frame = render(mesh, None, None, cam(), LIGHT_DOWN_Z)
        assert np.isfinite(frame.depth[frame.color.coverage]).all()
        # flat triangle at z=0 seen from (0,0,5): every hit is 5 away
        assert frame.depth[frame.color.coverage] == pytest.approx(5.0)

    def test_uncovered_depth_is_inf(self):
        verts = np.array([[-0.2, -0.2, 0.0], [0.2, -0.2, 0.0], [0.0, 0.3, 0.0]])
        mesh = TriangleMesh(vertices=verts, faces=np.array([[0, 1, 2]]))
        frame = render(mesh, None, None, cam(), LIGHT_DOWN_Z)
        assert frame.color.coverage.any() and not frame.color.coverage.all()
        assert np.isinf(frame.depth[~frame.color.coverage]).all()

    def test_triangle_behind_camera_skipped(self):
        verts = np.array([[-1.0, -1.0, 9.0], [1.0, -1.0, 9.0], [0.0, 1.0, 9.0]])
        mesh = TriangleMesh(vertices=verts, faces=np.array([[0, 1, 2]]))
        frame = render(mesh, None, None, cam(), LIGHT_DOWN_Z)
        assert not frame.color.coverage.any()
        assert np.isinf(frame.depth).all()

    def test_triangle_beyond_far_skipped(self):
        mesh = big_triangle(normals=UP_NORMALS)  # depth 5 from the camera
        frame = render(mesh, None, None, cam(far=4.0), LIGHT_DOWN_Z)
        assert not frame.color.coverage.any()


class TestTexturing:
    def test_nearest_sampling_picks_one_texel(self):
        tex = new_texel_grid(2)
        tex.data[0, 0] = (10, 20, 30)
        tex.data[0, 1] = (40, 50, 60)
        tex.data[1, 0] = (70, 80, 90)
        tex.data[1, 1] = (100, 110, 120)
        tex.coverage.fill(True)
        # all UVs inside u<0.5, v>=0.5, which is texel row 0, col 0
        uvs = np.array([[[0.1, 0.6], [0.4, 0.6], [0.1, 0.9]]])
        mesh = big_triangle(normals=UP_NORMALS, uvs=uvs)
        frame = render(mesh, tex, None, cam(), LIGHT_DOWN_Z)
        covered = frame.color.data[frame.color.coverage]
        assert (covered == np.array([10, 20, 30], dtype=np.uint8)).all()

    def test_texture_without_uvs_rejected(self):
        tex = new_texel_grid(4)
        mesh = big_triangle()
        with pytest.raises(ConfigError):
            render(mesh, tex, None, cam(), LIGHT_DOWN_Z)

    def test_normal_map_overrides_vertex_normals(self):
        nm = new_texel_grid(8)
        nm.data[:] = (255, 128, 128)  # decodes to +x
        nm.coverage.fill(True)
        uvs = np.array([[[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]]])
        # vertex normals face the light; the map says +x, perpendicular to it
        mesh = big_triangle(normals=UP_NORMALS, uvs=uvs)
        frame = render(mesh, None, nm, cam(), LIGHT_DOWN_Z)
        assert np.abs(frame.color.data.astype(int) - 51).max() <= 1

    def test_normal_map_background_falls_back_to_face_normal(self):
        nm = new_texel_grid(8)
        nm.data.fill(128)  # decodes below the usable-norm threshold
        uvs = np.array([[[0.1, 0.1], [0.9, 0.1], [0.5, 0.9]]])
        mesh = big_triangle(normals=UP_NORMALS, uvs=uvs)
        frame = render(mesh, None, nm, cam(), LIGHT_DOWN_Z)
        # face normal is +z (counter-clockwise winding), so full brightness
        assert (frame.color.data == 255).all()


class TestPerspective:
    def test_interpolation_is_perspective_correct(self):
        # edge spanning depth 2 to depth 8; fov 90 so screen coords are simple
        verts = np.array([[-1.6, 0.0, 3.0], [6.4, 0.0, -3.0], [0.0, 2.0, 0.0]])
        faces = np.array([[0, 1, 2]])
        colors = np.array([[0.0, 0.0, 0.0], [255.0, 255.0, 255.0], [0.0, 0.0, 0.0]])
        normals = np.tile([0.0, 0.0, 1.0], (3, 1))
        mesh = TriangleMesh(vertices=verts, faces=faces, colors=colors, normals=normals)
        camera = cam(fov_deg=90.0, width=512, height=512)
        frame = render(mesh, None, None, camera, LIGHT_DOWN_Z)
        # pixel just above the screen midpoint of that edge: affine blending
        # would give ~114 there, 1/z-weighted blending gives ~45
        value = int(frame.color.data[250, 256, 0])
        assert frame.color.coverage[250, 256]
        assert 35 < value < 70

    def test_render_deterministic(self):
        rng = np.random.default_rng(7)
        verts = rng.uniform(-2.0, 2.0, size=(30, 3))
        faces = rng.integers(0, 30, size=(20, 3))
        ok = (
            (faces[:, 0] != faces[:, 1])
            & (faces[:, 1] != faces[:, 2])
            & (faces[:, 0] != faces[:, 2])
        )
        faces = faces[ok]
        colors = rng.uniform(0.0, 255.0, size=(30, 3))
        mesh = TriangleMesh(vertices=verts, faces=faces, colors=colors)
        a = render(mesh, None, None, cam(), (0.3, -0.2, -1.0))
        b = render(mesh, None, None, cam(), (0.3, -0.2, -1.0))
        assert (a.color.data == b.color.data).all()
        assert (a.color.coverage == b.color.coverage).all()
        assert np.array_equal(a.depth, b.depth)
