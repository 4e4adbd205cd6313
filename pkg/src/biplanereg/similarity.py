"""Similarity measures between contrast features and rendered views."""

import enum

import numpy as np

from .exceptions import ConstantImage
from .validation import check_image, check_same_shape

_SIGMA_EPS = 1e-12


class MeasureKind(enum.Enum):
    """Registration objective selectable on the command line.

    Combined kinds average their two terms with equal weight.
    """

    SHADOW_DSA = "shadow-dsa"
    SHADOW_THR = "shadow-thr"
    EDGE = "edge"
    CADE = "cade"
    SHADOW_DSA_EDGE = "shadow-dsa+edge"
    SHADOW_THR_EDGE = "shadow-thr+edge"
    CADE_EDGE = "cade+edge"

    @property
    def components(self):
        """Elementary measures this kind averages over."""
        name = self.value
        if "+" in name:
            base, _, extra = name.partition("+")
            return (MeasureKind(base), MeasureKind(extra))
        return (self,)


def ncc(a, b):
    """Normalized cross correlation of two equally sized images.

    Normalized by the pixel count so the result lies in [-1, 1].

    Raises
    ------
    ConstantImage
        If either input has (numerically) zero standard deviation;
        callers map this to a score of 0.
    """
    a = check_image(a, "first image")
    b = check_image(b, "second image")
    check_same_shape(a, b)
    mu_a, mu_b = a.mean(), b.mean()
    sd_a, sd_b = a.std(), b.std()
    if sd_a <= _SIGMA_EPS or sd_b <= _SIGMA_EPS:
        raise ConstantImage("correlation of a constant image is undefined")
    return float(((a - mu_a) * (b - mu_b)).mean() / (sd_a * sd_b))


def ncc_product(pairs):
    """Product of per-plane correlations; 0 if any factor is undefined."""
    score = 1.0
    for a, b in pairs:
        try:
            score *= ncc(a, b)
        except ConstantImage:
            return 0.0
    return score


def score_shadow_dsa(features_a, features_b, views):
    """Per-plane correlation of the clamped subtraction image with the
    projected shadow, multiplied over planes."""
    return ncc_product([(features_a.dsa, views.shadow_a),
                        (features_b.dsa, views.shadow_b)])


def score_shadow_thr(features_a, features_b, views):
    """As :func:`score_shadow_dsa` with the binary contrast masks."""
    return ncc_product([(features_a.binary, views.shadow_a),
                        (features_b.binary, views.shadow_b)])


def score_edge(features_a, features_b, views):
    """Per-plane correlation of the extracted edge image with the
    rendered apparent edges, multiplied over planes."""
    return ncc_product([(features_a.edges, views.edges_a),
                        (features_b.edges, views.edges_b)])


def combine(a, b, w=0.5):
    """Weighted combination w*a + (1-w)*b; default equal weights."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"w must be in [0, 1], got {w}")
    return w * a + (1.0 - w) * b
