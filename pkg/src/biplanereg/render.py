"""Software rasterizer for model shadows and apparent-edge images.

Rasterization is perspective-correct in the sense that vertices are
projected through the full 3x4 camera and coverage is decided per pixel
center: a pixel belongs to a triangle iff its center (integer
coordinates) lies inside or on the boundary of the projected triangle.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .exceptions import OutOfView
from .geometry import project_many

_DEPTH_EPS = np.finfo(np.float64).eps


@dataclass(frozen=True)
class RenderedViews:
    """Per-plane shadow and apparent-edge renders for one candidate pose."""

    shadow_a: np.ndarray
    shadow_b: np.ndarray
    edges_a: np.ndarray
    edges_b: np.ndarray


def render_shadow(mesh, t, camera):
    """Binary projected shadow of the mesh translated by ``t``.

    A pixel is 1 iff at least one projected triangle covers its center.

    Raises
    ------
    OutOfView
        If no projected triangle touches the image (the caller scores
        such candidates as worst case).
    """
    px, w = project_many(camera, mesh.vertices + np.asarray(t, dtype=np.float64))
    valid = (w > _DEPTH_EPS).astype(np.uint8)
    out = np.zeros((camera.height, camera.width), np.uint8)
    touched = _raster_shadow(px[:, 0].copy(), px[:, 1].copy(), valid,
                             mesh.triangles, camera.width, camera.height, out)
    if touched == 0:
        raise OutOfView("projected model does not intersect the image")
    return out


def render_apparent_edges(mesh, t, camera):
    """Apparent-edge image: triangles rasterized with opacity 1 - |d.n|.

    ``d`` is the unit viewing direction from the camera center to the
    triangle centroid and ``n`` the unit face normal, both evaluated per
    triangle; overlapping triangles compose by per-pixel max.  Surface
    patches facing the camera vanish, patches seen edge-on render
    opaque, so the image highlights silhouette and interior contours.
    """
    t = np.asarray(t, dtype=np.float64)
    px, w = project_many(camera, mesh.vertices + t)
    valid = (w > _DEPTH_EPS).astype(np.uint8)
    view = mesh.face_centroids + t - camera.center
    view /= np.linalg.norm(view, axis=1, keepdims=True)
    opacity = 1.0 - np.abs(np.einsum("ij,ij->i", view, mesh.face_normals))
    np.clip(opacity, 0.0, 1.0, out=opacity)
    out = np.zeros((camera.height, camera.width), np.float64)
    touched = _raster_edges(px[:, 0].copy(), px[:, 1].copy(), valid,
                            mesh.triangles, opacity, camera.width, camera.height, out)
    if touched == 0:
        raise OutOfView("projected model does not intersect the image")
    return out


def render_views(mesh, t, cam_a, cam_b):
    """Render shadows and apparent edges in both planes for one pose."""
    return RenderedViews(
        shadow_a=render_shadow(mesh, t, cam_a),
        shadow_b=render_shadow(mesh, t, cam_b),
        edges_a=render_apparent_edges(mesh, t, cam_a),
        edges_b=render_apparent_edges(mesh, t, cam_b),
    )


@njit(cache=True, nogil=True)
def _raster_shadow(px, py, valid, tris, w, h, out):
    touched = 0
    for m in range(tris.shape[0]):
        i0, i1, i2 = tris[m, 0], tris[m, 1], tris[m, 2]
        if valid[i0] == 0 or valid[i1] == 0 or valid[i2] == 0:
            continue
        x0, y0 = px[i0], py[i0]
        x1, y1 = px[i1], py[i1]
        x2, y2 = px[i2], py[i2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area == 0.0:
            continue
        if area < 0.0:
            x1, x2 = x2, x1
            y1, y2 = y2, y1
        xmin = max(0, int(np.ceil(min(x0, min(x1, x2)))))
        xmax = min(w - 1, int(np.floor(max(x0, max(x1, x2)))))
        ymin = max(0, int(np.ceil(min(y0, min(y1, y2)))))
        ymax = min(h - 1, int(np.floor(max(y0, max(y1, y2)))))
        if xmin > xmax or ymin > ymax:
            continue
        touched += 1
        for yy in range(ymin, ymax + 1):
            fy = float(yy)
            for xx in range(xmin, xmax + 1):
                fx = float(xx)
                if ((x1 - x0) * (fy - y0) - (fx - x0) * (y1 - y0) >= 0.0
                        and (x2 - x1) * (fy - y1) - (fx - x1) * (y2 - y1) >= 0.0
                        and (x0 - x2) * (fy - y2) - (fx - x2) * (y0 - y2) >= 0.0):
                    out[yy, xx] = 1
    return touched


@njit(cache=True, nogil=True)
def _raster_edges(px, py, valid, tris, opacity, w, h, out):
    touched = 0
    for m in range(tris.shape[0]):
        i0, i1, i2 = tris[m, 0], tris[m, 1], tris[m, 2]
        if valid[i0] == 0 or valid[i1] == 0 or valid[i2] == 0:
            continue
        o = opacity[m]
        x0, y0 = px[i0], py[i0]
        x1, y1 = px[i1], py[i1]
        x2, y2 = px[i2], py[i2]
        area = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if area == 0.0:
            continue
        if area < 0.0:
            x1, x2 = x2, x1
            y1, y2 = y2, y1
        xmin = max(0, int(np.ceil(min(x0, min(x1, x2)))))
        xmax = min(w - 1, int(np.floor(max(x0, max(x1, x2)))))
        ymin = max(0, int(np.ceil(min(y0, min(y1, y2)))))
        ymax = min(h - 1, int(np.floor(max(y0, max(y1, y2)))))
        if xmin > xmax or ymin > ymax:
            continue
        touched += 1
        for yy in range(ymin, ymax + 1):
            fy = float(yy)
            for xx in range(xmin, xmax + 1):
                fx = float(xx)
                if ((x1 - x0) * (fy - y0) - (fx - x0) * (y1 - y0) >= 0.0
                        and (x2 - x1) * (fy - y1) - (fx - x1) * (y2 - y1) >= 0.0
                        and (x0 - x2) * (fy - y2) - (fx - x2) * (y0 - y2) >= 0.0
                        and o > out[yy, xx]):
                    out[yy, xx] = o
    return touched
