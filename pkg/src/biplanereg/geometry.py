"""Projection cameras for a biplane X-ray setup.

A camera is a 3x4 homogeneous matrix mapping world millimetres to pixel
coordinates.  Pixel convention: origin at the *center* of the top-left
pixel, x rightward, y downward; pixel centers therefore lie on integer
coordinates.  Translations are plain float64 3-vectors in mm.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateProjection, ParallelRays
from .validation import check_pixel, check_point3, check_projection_matrix

_DEPTH_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class ProjectionCamera:
    """One plane of a biplane system.

    Parameters
    ----------
    matrix : (3, 4) array
        Maps homogeneous 3-D points (mm) to homogeneous pixel coordinates.
        The upper-left 3x3 block must have full rank.
    width, height : int
        Image size in pixels.
    """

    matrix: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        m = check_projection_matrix(self.matrix)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")
        if np.linalg.matrix_rank(m[:, :3]) < 3:
            raise DegenerateProjection("camera matrix is rank-deficient")

    @property
    def center(self):
        """Optical center C in mm (the point with P @ [C, 1] = 0)."""
        return -np.linalg.solve(self.matrix[:, :3], self.matrix[:, 3])

    @property
    def image_center(self):
        """Pixel coordinates of the image center."""
        return np.array([(self.width - 1) / 2.0, (self.height - 1) / 2.0])


def project(camera, point):
    """Project a 3-D point (mm) to pixel coordinates.

    Raises
    ------
    DegenerateProjection
        If the homogeneous depth w is not positive.
    """
    p = check_point3(point)
    h = camera.matrix[:, :3] @ p + camera.matrix[:, 3]
    if h[2] <= _DEPTH_EPS:
        raise DegenerateProjection(f"point has non-positive depth w={h[2]!r}")
    return h[:2] / h[2]


def project_many(camera, points):
    """Project an (N, 3) array of points; returns pixels (N, 2) and depths (N,).

    Unlike :func:`project` this does not raise on non-positive depth;
    callers filter on the returned depths (rasterization skips such
    triangles).  Pixel values for w <= 0 are unspecified.
    """
    pts = np.asarray(points, dtype=np.float64)
    h = pts @ camera.matrix[:, :3].T + camera.matrix[:, 3]
    w = h[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = h[:, :2] / w[:, None]
    return px, w


def backproject_ray(camera, pixel):
    """Back-project a pixel to a world ray (origin, unit direction).

    Every point ``origin + s * direction`` with s > 0 projects back onto
    ``pixel`` and has positive depth.
    """
    uv = check_pixel(pixel)
    m = camera.matrix[:, :3]
    origin = camera.center
    d = np.linalg.solve(m, np.array([uv[0], uv[1], 1.0]))
    n = np.linalg.norm(d)
    if n == 0.0:
        raise DegenerateProjection("camera matrix is rank-deficient")
    d /= n
    # orient toward positive depth
    if m[2] @ d < 0:
        d = -d
    return origin, d


def initialization_point(cam_a, cam_b):
    """3-D point corresponding to the centers of both images.

    Realized as the midpoint of the shortest segment connecting the two
    central back-projected rays (their intersection when the rays meet).

    Raises
    ------
    ParallelRays
        If the central rays are (numerically) parallel.
    """
    oa, da = backproject_ray(cam_a, cam_a.image_center)
    ob, db = backproject_ray(cam_b, cam_b.image_center)
    cross = np.cross(da, db)
    denom = cross @ cross
    if np.sqrt(denom) < 1e-9:
        raise ParallelRays("central rays of the two planes are parallel")
    # closest points: oa + s*da and ob + t*db
    r = ob - oa
    s = np.cross(r, db) @ cross / denom
    t = np.cross(r, da) @ cross / denom
    qa = oa + s * da
    qb = ob + t * db
    return (qa + qb) / 2.0


def downsample_camera(camera, factor=2):
    """Camera for an image downsampled by block-averaging ``factor``^2 pixels.

    New pixel centers sit at old coordinates ``factor*i + (factor-1)/2``,
    so u' = (u - (factor-1)/2) / factor.
    """
    if factor < 1 or camera.width % factor or camera.height % factor:
        raise ValueError("image size must be divisible by the downsampling factor")
    shift = (factor - 1) / 2.0
    s = np.array([
        [1.0 / factor, 0.0, -shift / factor],
        [0.0, 1.0 / factor, -shift / factor],
        [0.0, 0.0, 1.0],
    ])
    return ProjectionCamera(s @ camera.matrix, camera.width // factor, camera.height // factor)


def save_cameras(path, cameras):
    """Write a biplane camera file.

    Schema (structured text, one record per plane)::

        biplane-cameras
        plane: A
        matrix: m00 m01 m02 m03 m10 ... m23   # 12 entries, row-major
        size: <width> <height>
        plane: B
        ...
    """
    lines = ["biplane-cameras"]
    for label, cam in cameras.items():
        lines.append(f"plane: {label}")
        lines.append("matrix: " + " ".join(repr(v) for v in cam.matrix.ravel()))
        lines.append(f"size: {cam.width} {cam.height}")
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def load_cameras(path):
    """Read a biplane camera file written by :func:`save_cameras`."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "biplane-cameras":
        raise ValueError(f"{path}: not a biplane camera file")
    cameras = {}
    label = None
    matrix = None
    for ln in lines[1:]:
        key, _, rest = ln.partition(":")
        key = key.strip()
        rest = rest.strip()
        if key == "plane":
            label = rest
        elif key == "matrix":
            vals = [float(v) for v in rest.split()]
            if len(vals) != 12:
                raise ValueError(f"{path}: matrix needs 12 entries, got {len(vals)}")
            matrix = np.array(vals).reshape(3, 4)
        elif key == "size":
            w, h = (int(v) for v in rest.split())
            if label is None or matrix is None:
                raise ValueError(f"{path}: size before plane/matrix")
            cameras[label] = ProjectionCamera(matrix, w, h)
            label, matrix = None, None
        else:
            raise ValueError(f"{path}: unknown key {key!r}")
    return cameras
