"""Input validation helpers.

Images are plain 2-D numpy arrays (row-major, ``img[y, x]``); binary
images hold exactly 0/1 in a uint8 array.  The checkers below normalize
dtypes, enforce the invariants the algorithms rely on, and raise the
package's typed exceptions so callers can react per error class.
"""

import numpy as np

from .exceptions import DimensionMismatch


def check_image(img, name="image"):
    """Coerce to a finite float64 2-D array and return it."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_binary_image(img, name="binary image"):
    """Coerce to a uint8 2-D array holding exactly 0/1 and return it."""
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if not np.isin(arr, (0, 1)).all():
            raise ValueError(f"{name} must contain only 0 and 1")
        arr = arr.astype(np.uint8)
    elif arr.max(initial=0) > 1:
        raise ValueError(f"{name} must contain only 0 and 1")
    return arr


def check_same_shape(a, b, what="images"):
    if a.shape != b.shape:
        raise DimensionMismatch(f"{what} differ in shape: {a.shape} vs {b.shape}")


def check_point3(p, name="point"):
    """Coerce to a finite float64 3-vector and return it."""
    arr = np.asarray(p, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {np.shape(p)}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_pixel(p, name="pixel"):
    arr = np.asarray(p, dtype=np.float64).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"{name} must be a 2-vector, got shape {np.shape(p)}")
    return arr


def check_projection_matrix(m, name="projection matrix"):
    arr = np.asarray(m, dtype=np.float64)
    if arr.shape != (3, 4):
        raise ValueError(f"{name} must be 3x4, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr
