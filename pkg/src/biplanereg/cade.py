"""Contrast-agent distribution estimate (CADE) and its consistency score.

For a candidate translation the model's interior voxels are labeled
contrasted iff they project onto contrasted pixels in *both* planes;
the labeling is then forward-projected and correlated against the
binary contrast masks.  Poses that explain the two planes with
different parts of the model produce inconsistent (empty or misplaced)
estimates and score low, which is what distinguishes this measure from
pure shadow overlap.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from .geometry import project
from .model import BinaryVolume
from .similarity import ncc_product
from .validation import check_binary_image, check_point3


@dataclass(frozen=True)
class CadeResult:
    """Estimate volume, its per-plane reprojections, and the score."""

    volume: BinaryVolume
    reproj_a: np.ndarray
    reproj_b: np.ndarray
    score: float


def estimate_cade(thr_a, thr_b, chi, t, cam_a, cam_b):
    """Binary contrast estimate on the model voxel grid.

    A voxel is 1 iff it is inside the model (``chi``) and its center,
    translated by ``t``, projects onto a contrasted pixel in both
    planes.  Pixel lookup is nearest neighbor; projections outside an
    image read as uncontrasted.  The result stays on the model-local
    grid of ``chi``.
    """
    thr_a = check_binary_image(thr_a, "plane A mask")
    thr_b = check_binary_image(thr_b, "plane B mask")
    t = check_point3(t, "translation")
    out = np.zeros_like(chi.data)
    _estimate(chi.data, chi.origin, chi.spacing, t,
              cam_a.matrix, cam_b.matrix, thr_a, thr_b, out)
    return BinaryVolume(out, chi.spacing, chi.origin)


@njit(cache=True, nogil=True)
def _estimate(chi, origin, spacing, t, pa, pb, thr_a, thr_b, out):
    nx, ny, nz = chi.shape
    ha, wa = thr_a.shape
    hb, wb = thr_b.shape
    for ix in range(nx):
        x = origin[0] + ix * spacing + t[0]
        for iy in range(ny):
            y = origin[1] + iy * spacing + t[1]
            for iz in range(nz):
                if chi[ix, iy, iz] == 0:
                    continue
                z = origin[2] + iz * spacing + t[2]
                w = pa[2, 0] * x + pa[2, 1] * y + pa[2, 2] * z + pa[2, 3]
                if w <= 0.0:
                    continue
                u = (pa[0, 0] * x + pa[0, 1] * y + pa[0, 2] * z + pa[0, 3]) / w
                v = (pa[1, 0] * x + pa[1, 1] * y + pa[1, 2] * z + pa[1, 3]) / w
                iu = int(np.floor(u + 0.5))
                iv = int(np.floor(v + 0.5))
                if iu < 0 or iu >= wa or iv < 0 or iv >= ha or thr_a[iv, iu] == 0:
                    continue
                w = pb[2, 0] * x + pb[2, 1] * y + pb[2, 2] * z + pb[2, 3]
                if w <= 0.0:
                    continue
                u = (pb[0, 0] * x + pb[0, 1] * y + pb[0, 2] * z + pb[0, 3]) / w
                v = (pb[1, 0] * x + pb[1, 1] * y + pb[1, 2] * z + pb[1, 3]) / w
                iu = int(np.floor(u + 0.5))
                iv = int(np.floor(v + 0.5))
                if iu < 0 or iu >= wb or iv < 0 or iv >= hb or thr_b[iv, iu] == 0:
                    continue
                out[ix, iy, iz] = 1


def splat_footprint_radius(volume, t, camera):
    """Closing radius in pixels: the projected voxel diagonal at the
    volume centroid depth, rounded up."""
    occ = volume.occupied_centers()
    c = occ.mean(axis=0) if len(occ) else (
        volume.origin + (np.array(volume.dims) - 1) * volume.spacing / 2.0)
    c = c + np.asarray(t, dtype=np.float64)
    half = volume.spacing / 2.0
    longest = 0.0
    for d in ((1, 1, 1), (1, 1, -1), (1, -1, 1), (-1, 1, 1)):
        delta = half * np.asarray(d, dtype=np.float64)
        span = np.linalg.norm(project(camera, c + delta) - project(camera, c - delta))
        longest = max(longest, span)
    return int(np.ceil(longest))


def forward_project(cade, t, camera, out_dims=None):
    """Project all contrasted voxels into an image.

    Each voxel center splats into its nearest pixel; the splat mask is
    then morphologically closed with a disk sized to the projected voxel
    footprint (:func:`splat_footprint_radius`) so the reprojection is a
    solid region rather than a dot pattern.

    ``out_dims`` is (width, height); defaults to the camera image size.
    """
    w, h = out_dims if out_dims is not None else (camera.width, camera.height)
    out = np.zeros((h, w), np.uint8)
    if cade.count() == 0:
        return out
    t = check_point3(t, "translation")
    _splat(cade.data, cade.origin, cade.spacing, t, camera.matrix, out)
    radius = splat_footprint_radius(cade, t, camera)
    if radius > 0 and out.any():
        yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1]
        disk = (xx * xx + yy * yy) <= radius * radius
        out = ndimage.binary_closing(out, structure=disk).astype(np.uint8)
    return out


@njit(cache=True, nogil=True)
def _splat(cade, origin, spacing, t, p, out):
    nx, ny, nz = cade.shape
    h, w = out.shape
    for ix in range(nx):
        x = origin[0] + ix * spacing + t[0]
        for iy in range(ny):
            y = origin[1] + iy * spacing + t[1]
            for iz in range(nz):
                if cade[ix, iy, iz] == 0:
                    continue
                z = origin[2] + iz * spacing + t[2]
                ww = p[2, 0] * x + p[2, 1] * y + p[2, 2] * z + p[2, 3]
                if ww <= 0.0:
                    continue
                u = (p[0, 0] * x + p[0, 1] * y + p[0, 2] * z + p[0, 3]) / ww
                v = (p[1, 0] * x + p[1, 1] * y + p[1, 2] * z + p[1, 3]) / ww
                iu = int(np.floor(u + 0.5))
                iv = int(np.floor(v + 0.5))
                if 0 <= iu < w and 0 <= iv < h:
                    out[iv, iu] = 1


def evaluate_cade(features_a, features_b, chi, t, cam_a, cam_b):
    """Full estimate -> reproject -> correlate pipeline for one pose."""
    thr_a, thr_b = features_a.binary, features_b.binary
    volume = estimate_cade(thr_a, thr_b, chi, t, cam_a, cam_b)
    reproj_a = forward_project(volume, t, cam_a,
                               (thr_a.shape[1], thr_a.shape[0]))
    reproj_b = forward_project(volume, t, cam_b,
                               (thr_b.shape[1], thr_b.shape[0]))
    score = ncc_product([(thr_a, reproj_a), (thr_b, reproj_b)])
    return CadeResult(volume, reproj_a, reproj_b, score)


def score_cade(features_a, features_b, chi, t, cam_a, cam_b):
    """Consistency score of the contrast estimate for one pose."""
    return evaluate_cade(features_a, features_b, chi, t, cam_a, cam_b).score
