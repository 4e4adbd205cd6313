"""Octree-like coarse-to-fine search over 3-D translations.

Level 0 exhaustively scores a cubic grid centered on the biplane
initialization point; every further level halves (or scales by the
configured factor) the step and scores the 3x3x3 neighborhoods of the
best candidates seen so far, deduplicating revisited positions.  All
candidate order is deterministic, so traces and results are identical
regardless of the number of worker threads.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import cade, render, similarity
from .exceptions import EmptySearch, OutOfView, ParallelRays
from .geometry import downsample_camera, initialization_point
from .similarity import MeasureKind

_QUANTUM = 1e-3  # mm; deduplication grid for visited candidates


@dataclass(frozen=True)
class SearchConfig:
    """Search-grid geometry, pruning width, and objective."""

    extent: float = 50.0        # mm half-width of the level-0 cube
    coarse_step: float = 16.0   # mm grid step at level 0
    refine_factor: float = 0.5
    keep_k: int = 8             # candidates expanded per refinement level
    min_step: float = 1.0       # mm; stop once the next step would be finer
    measure: MeasureKind = MeasureKind.CADE_EDGE
    n_jobs: int = 1             # <=0 means one worker per CPU
    use_pyramid: bool = False   # score coarse levels at half resolution

    def __post_init__(self):
        if self.extent <= 0 or self.coarse_step <= 0 or self.min_step <= 0:
            raise ValueError("extent, coarse_step and min_step must be positive")
        if not 0.0 < self.refine_factor < 1.0:
            raise ValueError("refine_factor must be in (0, 1)")
        if self.keep_k < 1:
            raise ValueError("keep_k must be >= 1")

    def level_steps(self):
        steps = [self.coarse_step]
        while steps[-1] * self.refine_factor >= self.min_step:
            steps.append(steps[-1] * self.refine_factor)
        return steps


@dataclass(frozen=True)
class ScoredCandidate:
    t: np.ndarray
    score: float


@dataclass(frozen=True)
class LevelStats:
    step: float
    n_evaluated: int
    best_score: float  # best over the trace up to and including this level


@dataclass(frozen=True)
class RegistrationResult:
    translation: np.ndarray
    score: float
    trace: tuple          # of ScoredCandidate, in evaluation order
    levels: tuple         # of LevelStats
    elapsed_s: float


@dataclass
class ScoreContext:
    """Everything needed to score a candidate translation.

    ``score`` dispatches on the measure kind; a callable measure
    ``f(ctx, t) -> float`` is accepted as well (used to plug synthetic
    objectives into the search and the evaluation harness).
    """

    features_a: object
    features_b: object
    mesh: object
    chi: object
    cam_a: object
    cam_b: object
    _half: object = field(default=None, repr=False)

    def downsampled(self):
        """Half-resolution context for pyramid levels (cached)."""
        if self._half is None:
            self._half = ScoreContext(
                features_a=self.features_a.downsampled(2),
                features_b=self.features_b.downsampled(2),
                mesh=self.mesh,
                chi=self.chi,
                cam_a=downsample_camera(self.cam_a, 2),
                cam_b=downsample_camera(self.cam_b, 2),
            )
        return self._half

    def score(self, measure, t):
        if callable(measure) and not isinstance(measure, MeasureKind):
            return float(measure(self, t))
        parts = measure.components
        if len(parts) == 2:
            return similarity.combine(self.score(parts[0], t), self.score(parts[1], t))
        if measure is MeasureKind.CADE:
            return cade.score_cade(self.features_a, self.features_b, self.chi,
                                   t, self.cam_a, self.cam_b)
        try:
            if measure is MeasureKind.EDGE:
                views = render.RenderedViews(
                    shadow_a=None, shadow_b=None,
                    edges_a=render.render_apparent_edges(self.mesh, t, self.cam_a),
                    edges_b=render.render_apparent_edges(self.mesh, t, self.cam_b))
                return similarity.score_edge(self.features_a, self.features_b, views)
            views = render.RenderedViews(
                shadow_a=render.render_shadow(self.mesh, t, self.cam_a),
                shadow_b=render.render_shadow(self.mesh, t, self.cam_b),
                edges_a=None, edges_b=None)
            if measure is MeasureKind.SHADOW_DSA:
                return similarity.score_shadow_dsa(self.features_a, self.features_b, views)
            if measure is MeasureKind.SHADOW_THR:
                return similarity.score_shadow_thr(self.features_a, self.features_b, views)
        except OutOfView:
            return 0.0  # worst-case-but-finite, keeps the search total
        raise ValueError(f"unhandled measure {measure!r}")


def _quantize(t):
    return (round(t[0] / _QUANTUM), round(t[1] / _QUANTUM), round(t[2] / _QUANTUM))


def _evaluate(ctx, measure, candidates, n_jobs):
    if n_jobs <= 0:
        import os
        n_jobs = os.cpu_count() or 1
    if n_jobs == 1 or len(candidates) < 2:
        return [ctx.score(measure, t) for t in candidates]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(lambda t: ctx.score(measure, t), candidates))


def register(features_a, features_b, model, cams, cfg=None):
    """Find the translation maximizing the configured measure.

    The model centroid is moved onto the biplane initialization point,
    a cubic grid of half-width ``cfg.extent`` is scored around it, and
    the grid is refined around the ``cfg.keep_k`` best candidates until
    the step drops below ``cfg.min_step``.  Score ties break toward the
    lexicographically smallest (x, y, z).

    Returns a :class:`RegistrationResult`; its trace contains every
    scored candidate in evaluation order.
    """
    cfg = cfg or SearchConfig()
    cam_a, cam_b = cams
    started = time.perf_counter()
    try:
        target = initialization_point(cam_a, cam_b)
    except ParallelRays as exc:
        raise EmptySearch("cannot build an initialization point") from exc
    base = target - model.centroid()
    ctx = ScoreContext(features_a, features_b, model.mesh, model.volume, cam_a, cam_b)

    steps = cfg.level_steps()
    half_res = cfg.use_pyramid and len(steps) > 1
    trace = []
    levels = []
    visited = set()
    best = None  # (-score, x, y, z, index into trace)

    for level, step in enumerate(steps):
        if level == 0:
            k = int(np.floor(cfg.extent / cfg.coarse_step + 1e-12))
            offsets = np.arange(-k, k + 1) * step
            candidates = [base + np.array((dx, dy, dz))
                          for dx in offsets for dy in offsets for dz in offsets]
        else:
            kept = sorted(trace, key=lambda c: (-c.score, c.t[0], c.t[1], c.t[2]))
            kept = kept[:cfg.keep_k]
            candidates = [c.t + step * np.array((dx, dy, dz))
                          for c in kept
                          for dx in (-1, 0, 1) for dy in (-1, 0, 1) for dz in (-1, 0, 1)]
        fresh = []
        for t in candidates:
            key = _quantize(t)
            if key not in visited:
                visited.add(key)
                fresh.append(t)
        level_ctx = ctx.downsampled() if half_res and level < len(steps) - 1 else ctx
        scores = _evaluate(level_ctx, cfg.measure, fresh, cfg.n_jobs)
        for t, s in zip(fresh, scores):
            trace.append(ScoredCandidate(t=t, score=float(s)))
            cand_key = (-trace[-1].score, t[0], t[1], t[2])
            if best is None or cand_key < best[0]:
                best = (cand_key, trace[-1])
        levels.append(LevelStats(step=step, n_evaluated=len(fresh),
                                 best_score=best[1].score))

    return RegistrationResult(
        translation=best[1].t,
        score=best[1].score,
        trace=tuple(trace),
        levels=tuple(levels),
        elapsed_s=time.perf_counter() - started,
    )
