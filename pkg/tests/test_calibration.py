import numpy as np
import pytest

from muralsim.calibration import CalibrationError, CameraIntrinsics, calibrate_camera
from muralsim.geometry import CameraModel, WallFrame, look_at

# high-resolution tracking camera: 4K sensor, ~73 deg horizontal FOV
INTR = CameraIntrinsics(focal_px=2600.0, principal_point=(1920.0, 1080.0),
                        image_size=(3840, 2160))

# four large markers spread wide across the mural wall
MARKERS_WALL = np.array([
    [0.3, 0.3, 0.0],
    [5.7, 0.4, 0.0],
    [5.6, 4.2, 0.0],
    [0.4, 4.1, 0.0],
])


def true_camera(position=(2.0, 1.5, 8.0), target=(2.8, 2.2, 0.0)):
    return CameraModel(focal_px=INTR.focal_px, principal_point=np.array(INTR.principal_point),
                       position=np.array(position, dtype=float),
                       rotation=look_at(position, target), image_size=INTR.image_size)


def project_markers(cam, markers=MARKERS_WALL):
    return np.array([cam.project(m) for m in markers])


class TestCalibrateCamera:
    def test_noiseless_roundtrip(self):
        cam = true_camera()
        recovered = calibrate_camera(project_markers(cam), MARKERS_WALL, INTR)
        assert np.linalg.norm(recovered.position - cam.position) < 1e-6
        assert np.linalg.norm(recovered.rotation - cam.rotation) < 1e-6
        # all four markers reproject inside half a pixel
        for m, px in zip(MARKERS_WALL, project_markers(cam)):
            assert np.linalg.norm(recovered.project(m) - px) < 0.5

    def test_symmetric_setup_axis_through_center(self):
        square = np.array([[1.0, 1.0, 0.0], [3.0, 1.0, 0.0],
                           [3.0, 3.0, 0.0], [1.0, 3.0, 0.0]])
        cam = true_camera(position=(2.0, 2.0, 6.0), target=(2.0, 2.0, 0.0))
        recovered = calibrate_camera(project_markers(cam, square), square, INTR)
        # the optical axis must hit the square's center
        axis = recovered.rotation[:, 2]
        t = -recovered.position[2] / axis[2]
        hit = recovered.position + t * axis
        assert np.allclose(hit[:2], [2.0, 2.0], atol=1e-6)

    def test_pixel_noise_accuracy_at_range(self):
        cam = true_camera()
        px_clean = project_markers(cam)
        errors = []
        for trial in range(100):
            rng = np.random.default_rng(trial)
            noisy = px_clean + rng.uniform(-0.5, 0.5, size=px_clean.shape)
            recovered = calibrate_camera(noisy, MARKERS_WALL, INTR)
            errors.append(np.linalg.norm(recovered.position - cam.position))
        assert np.percentile(errors, 95) < 0.02

    def test_marker_relabeling_invariance(self):
        cam = true_camera()
        px = project_markers(cam)
        base = calibrate_camera(px, MARKERS_WALL, INTR)
        perm = [2, 0, 3, 1]
        permuted = calibrate_camera(px[perm], MARKERS_WALL[perm], INTR)
        assert np.allclose(base.position, permuted.position, atol=1e-9)
        assert np.allclose(base.rotation, permuted.rotation, atol=1e-9)

    def test_collinear_markers_rejected(self):
        bad = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0],
                        [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        cam = true_camera()
        with pytest.raises(CalibrationError, match="collinear"):
            calibrate_camera(project_markers(cam, bad), bad, INTR)

    def test_non_coplanar_markers_rejected(self):
        bad = MARKERS_WALL.copy()
        bad[0, 2] = 0.5
        with pytest.raises(CalibrationError, match="coplanar"):
            calibrate_camera(np.zeros((4, 2)) + 500, bad, INTR)

    def test_offset_wall_frame(self):
        wall = WallFrame(origin=np.array([5.0, -1.0, 2.0]))
        cam_pos_wall = np.array([2.0, 1.5, 8.0])
        cam = CameraModel(
            focal_px=INTR.focal_px, principal_point=np.array(INTR.principal_point),
            position=wall.to_world(cam_pos_wall),
            rotation=look_at(wall.to_world(cam_pos_wall), wall.to_world((1.7, 1.7, 0.0))),
            image_size=INTR.image_size)
        px = np.array([cam.project(wall.to_world(m)) for m in MARKERS_WALL])
        recovered = calibrate_camera(px, MARKERS_WALL, INTR, wall=wall)
        assert np.linalg.norm(recovered.position - cam.position) < 1e-6
        assert np.linalg.norm(recovered.rotation - cam.rotation) < 1e-6
