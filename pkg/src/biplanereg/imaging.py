"""2-D image container conventions and the shared filter bank.

An image is a float64 array indexed ``img[y, x]``; a binary image is a
uint8 array of 0/1.  All filters use replicate (coordinate-clamping)
borders so that image borders do not generate spurious edges.
"""

import numpy as np
from numba import njit
from scipy import ndimage
from scipy.special import expit

from .exceptions import InvalidKernel
from .validation import check_binary_image, check_image, check_same_shape

__all__ = [
    "subtract", "clamp_negative", "median_filter", "sigmoid_weight",
    "dog_filter", "threshold", "mean_std", "downsample", "downsample_binary",
    "read_pgm", "write_pgm", "read_float_image", "write_float_image",
]


def subtract(minuend, subtrahend):
    """Per-pixel difference, unclamped.  Raises DimensionMismatch."""
    a = check_image(minuend, "minuend")
    b = check_image(subtrahend, "subtrahend")
    check_same_shape(a, b)
    return a - b


def clamp_negative(img):
    """Set negative pixels to 0."""
    return np.maximum(check_image(img), 0.0)


def median_filter(img, kernel):
    """Median filter with a kernel x kernel window and replicate borders.

    Window convention: offsets ``-(kernel//2) .. kernel-1-kernel//2`` per
    axis (for even kernels the window extends one pixel further up/left),
    and the median is the rank ``kernel*kernel//2`` element of the sorted
    window (the upper of the two middle values when the count is even).
    Border windows clamp coordinates, i.e. edge pixels repeat.

    Integer-valued images with a value range up to 16 bits go through a
    sliding-histogram path; anything else falls back to a sort-based
    filter.  Both produce identical results on the shared domain.
    """
    a = check_image(img)
    k = int(kernel)
    if k < 1:
        raise InvalidKernel(f"kernel must be >= 1, got {kernel}")
    if k == 1:
        return a.copy()
    ints = np.floor(a)
    if k > 5 and np.array_equal(ints, a):
        lo = ints.min()
        span = ints.max() - lo
        if span < 65536:
            q = (ints - lo).astype(np.uint16)
            out = np.empty_like(q)
            _median_hist(q, k, int(span) + 1, out)
            return out.astype(np.float64) + lo
    return ndimage.median_filter(a, size=k, mode="nearest")


@njit(cache=True, nogil=True)
def _median_hist(img, k, nbins, out):
    # Huang-style sliding histogram with a 256-bucket coarse level.
    h, w = img.shape
    lo_off = k // 2
    hi_off = k - 1 - k // 2
    rank = (k * k) // 2
    ncoarse = (nbins + 255) // 256
    fine = np.zeros(nbins, np.int32)
    coarse = np.zeros(ncoarse, np.int32)
    for y in range(h):
        fine[:] = 0
        coarse[:] = 0
        # initial window at x = 0
        for dx in range(-lo_off, hi_off + 1):
            cx = min(max(dx, 0), w - 1)
            for dy in range(-lo_off, hi_off + 1):
                cy = min(max(y + dy, 0), h - 1)
                v = img[cy, cx]
                fine[v] += 1
                coarse[v >> 8] += 1
        for x in range(w):
            if x > 0:
                cx_out = min(max(x - 1 - lo_off, 0), w - 1)
                cx_in = min(max(x + hi_off, 0), w - 1)
                for dy in range(-lo_off, hi_off + 1):
                    cy = min(max(y + dy, 0), h - 1)
                    v = img[cy, cx_out]
                    fine[v] -= 1
                    coarse[v >> 8] -= 1
                    v = img[cy, cx_in]
                    fine[v] += 1
                    coarse[v >> 8] += 1
            # rank-th value (0-indexed) via coarse then fine walk
            cum = 0
            b = 0
            while cum + coarse[b] <= rank:
                cum += coarse[b]
                b += 1
            v = b << 8
            while cum + fine[v] <= rank:
                cum += fine[v]
                v += 1
            out[y, x] = v


def sigmoid_weight(img, t, s):
    """Logistic weighting 1 / (1 + exp(-(img - t) * s)).

    Monotone in the input; maps the transition zone around ``t`` to
    (0, 1) with slope controlled by ``s > 0``.
    """
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    return expit((check_image(img) - t) * s)


def dog_filter(img, sigma):
    """Gradient magnitude of Gaussian-derivative responses at scale sigma.

    Returns sqrt(Gx^2 + Gy^2) where Gx, Gy are separable first-derivative
    of-Gaussian responses.  Kernels are sampled, normalized so that the
    smoothing kernel sums to 1, truncated at radius ceil(3*sigma), and
    applied with replicate borders.
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    a = check_image(img)
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    g = np.exp(-(x * x) / (2.0 * sigma * sigma))
    g /= g.sum()
    dg = -(x / (sigma * sigma)) * g
    gx = ndimage.correlate1d(ndimage.correlate1d(a, dg, axis=1, mode="nearest"),
                             g, axis=0, mode="nearest")
    gy = ndimage.correlate1d(ndimage.correlate1d(a, dg, axis=0, mode="nearest"),
                             g, axis=1, mode="nearest")
    return np.hypot(gx, gy)


def threshold(img, level):
    """Binary image marking pixels strictly above ``level``."""
    return (check_image(img) > level).astype(np.uint8)


def mean_std(img):
    """Population mean and standard deviation over all pixels (divide by N)."""
    a = check_image(img)
    return float(a.mean()), float(a.std())


def downsample(img, factor=2):
    """Block-mean downsampling by an integer factor."""
    a = check_image(img)
    h, w = a.shape
    if factor < 1 or h % factor or w % factor:
        raise ValueError("image size must be divisible by the downsampling factor")
    return a.reshape(h // factor, factor, w // factor, factor).mean(axis=(1, 3))


def downsample_binary(img, factor=2):
    """Block-any downsampling for binary images."""
    a = check_binary_image(img)
    h, w = a.shape
    if factor < 1 or h % factor or w % factor:
        raise ValueError("image size must be divisible by the downsampling factor")
    return a.reshape(h // factor, factor, w // factor, factor).max(axis=(1, 3))


def write_pgm(path, img, maxval=4095):
    """Write a binary (P5) PGM; values are rounded and clipped to [0, maxval].

    maxval > 255 selects the 16-bit big-endian sample format.
    """
    a = check_image(img)
    if not 0 < maxval < 65536:
        raise ValueError("maxval must be in 1..65535")
    q = np.clip(np.rint(a), 0, maxval)
    data = q.astype(">u2" if maxval > 255 else np.uint8)
    with open(path, "wb") as f:
        f.write(f"P5\n{a.shape[1]} {a.shape[0]}\n{maxval}\n".encode())
        f.write(data.tobytes())


def read_pgm(path):
    """Read a binary (P5) PGM into a float64 image."""
    with open(path, "rb") as f:
        data = f.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic != b"P5":
        raise ValueError(f"{path}: not a P5 PGM")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype(np.uint8)
    raw = np.frombuffer(data, dtype=dtype, count=w * h, offset=pos)
    return raw.reshape(h, w).astype(np.float64)


def write_float_image(path, img):
    """Write the 32-bit float intermediate format.

    Layout: the text header ``float-image\\nsize: <w> <h>\\n``, a blank
    line, then width*height little-endian float32 samples row-major.
    """
    a = check_image(img)
    with open(path, "wb") as f:
        f.write(f"float-image\nsize: {a.shape[1]} {a.shape[0]}\n\n".encode())
        f.write(a.astype("<f4").tobytes())


def read_float_image(path):
    with open(path, "rb") as f:
        data = f.read()
    end = data.index(b"\n\n") + 2
    lines = data[:end].decode().splitlines()
    if lines[0] != "float-image":
        raise ValueError(f"{path}: not a float-image file")
    w, h = (int(v) for v in lines[1].split(":")[1].split())
    raw = np.frombuffer(data, dtype="<f4", count=w * h, offset=end)
    return raw.reshape(h, w).astype(np.float64)
