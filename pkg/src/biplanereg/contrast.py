"""Contrast-agent extraction from biplane fluoroscopic sequences.

The pipeline per plane: pick the uncontrasted reference frame that best
matches the chosen contrasted frame, subtract, clamp negatives, median
filter, then derive a binary contrast mask and a smooth edge image.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import imaging
from .exceptions import NoUncontrastedFrame
from .validation import check_image

DEFAULT_REFERENCE_WIDTH = 1024


@dataclass(frozen=True)
class PipelineParams:
    """Contrast-pipeline parameters.

    Pixel-denominated values (``median_kernel``, ``dog_sigma``) are
    stated at ``reference_width`` and scaled proportionally to the
    actual frame width before use; ``sigmoid_s`` acts on intensities and
    is never scaled.  ``sigmoid_variant`` selects where the logistic
    transition is centered: ``"subtract"`` centers it at the level
    ``mean - std`` of the filtered image (so contrasted pixels saturate
    toward 1); ``"add"`` keeps the alternative sign convention, which
    centers the transition at ``-(mean - std)``.
    """

    median_kernel: int = 30
    sigmoid_s: float = 0.1
    dog_sigma: float = 24.0
    sigmoid_variant: str = "subtract"
    reference_width: int = DEFAULT_REFERENCE_WIDTH

    def __post_init__(self):
        if self.median_kernel < 1:
            raise ValueError("median_kernel must be >= 1")
        if self.sigmoid_s <= 0 or self.dog_sigma <= 0:
            raise ValueError("sigmoid_s and dog_sigma must be positive")
        if self.sigmoid_variant not in ("subtract", "add"):
            raise ValueError(f"unknown sigmoid_variant {self.sigmoid_variant!r}")

    def scaled_to(self, width):
        """Parameters rescaled for frames of the given width."""
        f = width / self.reference_width
        return replace(
            self,
            median_kernel=max(1, int(round(self.median_kernel * f))),
            dog_sigma=self.dog_sigma * f,
            reference_width=width,
        )


@dataclass(frozen=True)
class FluoroSequence:
    """Frames of one plane with per-frame contrast labels."""

    frames: tuple          # of float64 images, equal dims
    contrast_labels: tuple  # of bool, True = contrasted
    plane_id: str = "A"

    def __post_init__(self):
        frames = tuple(check_image(f, f"frame {i}") for i, f in enumerate(self.frames))
        labels = tuple(bool(b) for b in self.contrast_labels)
        if len(frames) != len(labels):
            raise ValueError("one label per frame required")
        if not any(labels) or all(labels):
            raise ValueError("need at least one contrasted and one uncontrasted frame")
        shape = frames[0].shape
        if any(f.shape != shape for f in frames):
            raise ValueError("all frames must share dimensions")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "contrast_labels", labels)

    @property
    def contrasted_indices(self):
        return tuple(i for i, c in enumerate(self.contrast_labels) if c)

    @property
    def uncontrasted_indices(self):
        return tuple(i for i, c in enumerate(self.contrast_labels) if not c)


@dataclass(frozen=True)
class ContrastFeatures:
    """Outputs of the per-plane contrast pipeline."""

    dsa: np.ndarray       # negative-clamped subtraction image
    filtered: np.ndarray  # median-filtered dsa
    binary: np.ndarray    # filtered > mean + std
    edges: np.ndarray     # gradient-magnitude edge image
    mean: float           # mean of `filtered`
    std: float            # std of `filtered`

    def downsampled(self, factor=2):
        """Block-averaged features for coarse search levels.

        Float images are block-meaned, the contrast mask block-any'd and
        the statistics recomputed on the downsampled filtered image.
        """
        filtered = imaging.downsample(self.filtered, factor)
        mean, std = imaging.mean_std(filtered)
        return ContrastFeatures(
            dsa=imaging.downsample(self.dsa, factor),
            filtered=filtered,
            binary=imaging.downsample_binary(self.binary, factor),
            edges=imaging.downsample(self.edges, factor),
            mean=mean,
            std=std,
        )


def select_reference(seq, contrasted_index):
    """Uncontrasted frame minimizing the L1 norm of the subtraction image.

    Ties break toward the frame temporally closest to the contrasted
    frame, then toward the earlier frame.
    """
    if not seq.contrast_labels[contrasted_index]:
        raise ValueError(f"frame {contrasted_index} is not labeled contrasted")
    candidates = seq.uncontrasted_indices
    if not candidates:
        raise NoUncontrastedFrame("sequence has no uncontrasted frame")
    ic = seq.frames[contrasted_index]
    return min(
        candidates,
        key=lambda i: (float(np.abs(seq.frames[i] - ic).sum()),
                       abs(i - contrasted_index), i),
    )


def extract_features(seq, contrasted_index, params=None):
    """Run the full contrast pipeline for one contrasted frame.

    Pixel-denominated parameters are rescaled to the frame width first
    (see :class:`PipelineParams`).
    """
    params = params or PipelineParams()
    params = params.scaled_to(seq.frames[0].shape[1])
    ref = select_reference(seq, contrasted_index)
    dsa = imaging.clamp_negative(
        imaging.subtract(seq.frames[ref], seq.frames[contrasted_index]))
    filtered = imaging.median_filter(dsa, params.median_kernel)
    mean, std = imaging.mean_std(filtered)
    center = mean - std
    if params.sigmoid_variant == "add":
        center = -center
    weighted = imaging.sigmoid_weight(filtered, center, params.sigmoid_s)
    return ContrastFeatures(
        dsa=dsa,
        filtered=filtered,
        binary=imaging.threshold(filtered, mean + std),
        edges=imaging.dog_filter(weighted, params.dog_sigma),
        mean=mean,
        std=std,
    )


def label_frames_by_intensity(frames):
    """Heuristic contrast labels: frames whose mean intensity drops more
    than one standard deviation below the sequence baseline.

    A simple stand-in for injection detection; intended for sequences
    without manual annotations.
    """
    means = np.array([check_image(f).mean() for f in frames])
    baseline = means.mean()
    spread = means.std()
    if spread == 0.0:
        return [False] * len(frames)
    return list(means < baseline - spread)


def write_labels(path, labels):
    """Write per-plane contrast labels.

    Schema::

        contrast-labels
        plane: A
        frames: u u c c    # one token per frame, c=contrasted
        plane: B
        frames: ...
    """
    lines = ["contrast-labels"]
    for plane, flags in labels.items():
        lines.append(f"plane: {plane}")
        lines.append("frames: " + " ".join("c" if b else "u" for b in flags))
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_labels(path):
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "contrast-labels":
        raise ValueError(f"{path}: not a contrast-labels file")
    labels = {}
    plane = None
    for ln in lines[1:]:
        key, _, rest = ln.partition(":")
        key, rest = key.strip(), rest.strip()
        if key == "plane":
            plane = rest
        elif key == "frames":
            if plane is None:
                raise ValueError(f"{path}: frames before plane")
            tokens = rest.split()
            if any(t not in ("c", "u") for t in tokens):
                raise ValueError(f"{path}: frame tokens must be 'c' or 'u'")
            labels[plane] = [t == "c" for t in tokens]
        else:
            raise ValueError(f"{path}: unknown key {key!r}")
    return labels
