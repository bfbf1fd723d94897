"""Descriptor matching.

Two schemes: direct matching counts probe coefficients that land within a
threshold of some surviving gallery coefficient at the same index, and
LDA matching takes the nearest projected training sample by Euclidean
distance. Tie-breaks are total, so classification is deterministic.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .descriptor import Hffd
from .lda import LdaModel, project

DEFAULT_TAU_M_SCALE = 0.05


@dataclass
class GalleryEntry:
    """One enrolled descriptor, optionally with its LDA projection."""

    class_id: int
    hffd: Hffd
    projected: Optional[np.ndarray] = None


@dataclass(frozen=True)
class MatchScore:
    """Direct-matching score of a probe against one class."""

    matched_points: int
    sum_distance: float
    class_id: int


def build_gallery(hffds: Sequence[Hffd], model: Optional[LdaModel] = None) -> list:
    """Wrap descriptors as gallery entries, projecting them when a model is given."""
    entries = []
    for h in hffds:
        projected = project(model, h.slots) if model is not None else None
        entries.append(GalleryEntry(class_id=h.class_id, hffd=h, projected=projected))
    return entries


def _points(h: Hffd):
    """Surviving (index, value) points: all of slot 0 plus kept aux entries."""
    idx = [np.arange(h.n_f, dtype=np.intp)]
    val = [h.base]
    for s in range(1, h.n_p):
        kept = np.flatnonzero(h.masks[s - 1])
        if kept.size:
            idx.append(kept)
            val.append(h.slot(s)[kept])
    return np.concatenate(idx), np.concatenate(val)


def _candidate_grid(h: Hffd):
    """(n_p, n_f) value grid and validity mask of a gallery descriptor."""
    grid = h.slots.reshape(h.n_p, h.n_f)
    valid = np.ones((h.n_p, h.n_f), dtype=bool)
    if h.n_p > 1:
        valid[1:] = h.masks == 1
    return grid, valid


def default_match_threshold(entries: Sequence[GalleryEntry],
                            scale: float = DEFAULT_TAU_M_SCALE) -> np.ndarray:
    """Per-index matching threshold: `scale` times the value range observed
    over all surviving gallery coefficients at that index."""
    if not entries:
        raise ValueError("empty gallery")
    n_f = entries[0].hffd.n_f
    lo = np.full(n_f, np.inf)
    hi = np.full(n_f, -np.inf)
    for e in entries:
        grid, valid = _candidate_grid(e.hffd)
        lo = np.minimum(lo, np.where(valid, grid, np.inf).min(axis=0))
        hi = np.maximum(hi, np.where(valid, grid, -np.inf).max(axis=0))
    return scale * (hi - lo)


def direct_match_score(probe: Hffd, entry: GalleryEntry, tau_m) -> MatchScore:
    """Count probe points matching this gallery descriptor.

    A probe point (j, v) matches when the closest surviving gallery
    coefficient at index j lies within tau_m of v; the score sums those
    closest distances over the matched points. tau_m may be a scalar or a
    per-index vector of length n_f.
    """
    g = entry.hffd
    if g.n_f != probe.n_f:
        raise ValueError(f"probe n_f={probe.n_f} but gallery entry has n_f={g.n_f}")
    p_idx, p_val = _points(probe)
    grid, valid = _candidate_grid(g)

    diffs = np.abs(grid[:, p_idx] - p_val[None, :])
    diffs[~valid[:, p_idx]] = np.inf
    mins = diffs.min(axis=0)

    tau = np.asarray(tau_m, dtype=np.float64)
    if tau.ndim == 0:
        limit = np.full(p_idx.shape, float(tau))
    elif tau.shape == (probe.n_f,):
        limit = tau[p_idx]
    else:
        raise ValueError(f"tau_m must be scalar or length-{probe.n_f}, got {tau.shape}")
    if np.any(limit < 0):
        raise ValueError("tau_m must be non-negative")

    matched = mins <= limit
    return MatchScore(matched_points=int(matched.sum()),
                      sum_distance=float(mins[matched].sum()),
                      class_id=g.class_id)


def best_scores_per_class(probe: Hffd, gallery: Sequence[GalleryEntry],
                          tau_m) -> list:
    """Best direct MatchScore of each gallery class, ascending class id."""
    if not gallery:
        raise ValueError("empty gallery")
    best = {}
    for entry in gallery:
        score = direct_match_score(probe, entry, tau_m)
        cur = best.get(entry.class_id)
        if cur is None or (-score.matched_points, score.sum_distance) < (
                -cur.matched_points, cur.sum_distance):
            best[entry.class_id] = score
    return [best[c] for c in sorted(best)]


def classify_direct(probe: Hffd, gallery: Sequence[GalleryEntry], tau_m) -> int:
    """Class with the most matching points; ties fall to the smaller summed
    distance, then the smaller class id."""
    scores = best_scores_per_class(probe, gallery, tau_m)
    winner = min(scores, key=lambda s: (-s.matched_points, s.sum_distance, s.class_id))
    return winner.class_id


def classify_lda(probe: Hffd, model: LdaModel, gallery: Sequence[GalleryEntry],
                 class_means: bool = False):
    """Nearest projected training sample by Euclidean distance.

    Returns (class_id, distance); ties go to the smaller class id. With
    `class_means` the comparison targets are per-class projection means
    instead of individual samples.
    """
    if not gallery:
        raise ValueError("empty gallery")
    for e in gallery:
        if e.projected is None:
            raise ValueError(f"gallery entry for class {e.class_id} is not projected")
        if e.projected.shape != (model.m,):
            raise ValueError(
                f"gallery projection has shape {e.projected.shape}, model m={model.m}")

    p = project(model, probe.slots)
    if class_means:
        targets = {}
        for e in gallery:
            targets.setdefault(e.class_id, []).append(e.projected)
        pairs = [(np.mean(v, axis=0), c) for c, v in sorted(targets.items())]
    else:
        pairs = [(e.projected, e.class_id) for e in gallery]

    best_class, best_dist = None, np.inf
    for target, class_id in pairs:
        dist = float(np.linalg.norm(p - target))
        if dist < best_dist or (dist == best_dist and class_id < best_class):
            best_class, best_dist = class_id, dist
    return best_class, best_dist
