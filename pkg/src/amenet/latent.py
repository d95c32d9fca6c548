"""Latent-space analysis: Procrustes alignment and multi-type K-functions."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from ._rng import substream

DEFAULT_WINDOW = (-3.0, 3.0, -3.0, 3.0)


# ---------------------------------------------------------------- Procrustes


def orthogonal_procrustes(S: np.ndarray, R: np.ndarray, rtol: float = 1e-12):
    """Orthogonal Omega minimising ||S Omega - R||_F, or None when S'R is rank deficient.

    Reflections are allowed: Omega = A B' from the SVD S'R = A diag(s) B'.
    """
    A, s, Bt = np.linalg.svd(S.T @ R)
    if s.size == 0 or s.min() <= rtol * max(s.max(), np.finfo(float).tiny):
        return None
    return A @ Bt


@dataclass
class AlignmentResult:
    aligned: np.ndarray  # (M, n, t)
    reference: np.ndarray  # (n, t)
    rotations: np.ndarray  # (M, t, t)
    n_degenerate: int = 0


def procrustes_align(configs, max_sweeps: int = 2) -> AlignmentResult:
    """Rotate each configuration onto the running element-wise mean.

    ``configs`` is a sequence (or array) of equally shaped ``(n, t)`` matrices,
    normally the stacked ``[u; v]`` of each posterior draw. Every sweep
    recomputes the reference as the mean of the currently aligned
    configurations and realigns the originals to it.
    """
    X = np.asarray(configs, dtype=float)
    if X.ndim != 3:
        raise ValueError("configs must be a stack of (n, t) matrices")
    M, n, t = X.shape
    if t < 1:
        raise ValueError("alignment needs t >= 1")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be >= 1")
    eye = np.eye(t)
    rotations = np.broadcast_to(eye, (M, t, t)).copy()
    aligned = X.copy()
    degenerate = 0
    for _ in range(max_sweeps):
        R = aligned.mean(axis=0)
        degenerate = 0
        for m in range(M):
            omega = orthogonal_procrustes(X[m], R)
            if omega is None:
                omega = eye
                degenerate += 1
            rotations[m] = omega
            aligned[m] = X[m] @ omega
    if degenerate:
        warnings.warn(f"{degenerate} of {M} draws had a rank-deficient cross-product; left unrotated", stacklevel=2)
    return AlignmentResult(aligned=aligned, reference=aligned.mean(axis=0), rotations=rotations, n_degenerate=degenerate)


def align_samples(u: np.ndarray, v: np.ndarray, max_sweeps: int = 2):
    """Align posterior draws of u (M, n_a, t) and v (M, n_e, t) jointly."""
    n_a = u.shape[1]
    res = procrustes_align(np.concatenate([u, v], axis=1), max_sweeps)
    return res.aligned[:, :n_a], res.aligned[:, n_a:], res


def posterior_mean_positions(u_aligned: np.ndarray, v_aligned: np.ndarray):
    return np.asarray(u_aligned).mean(axis=0), np.asarray(v_aligned).mean(axis=0)


# ---------------------------------------------------------------- K-functions


@dataclass
class MarkedPointPattern:
    points: np.ndarray
    marks: np.ndarray
    window: tuple = DEFAULT_WINDOW  # (xmin, xmax, ymin, ymax)
    n_outside: int = field(init=False, default=0)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.marks = np.asarray(self.marks)
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ValueError(f"points must be (n, 2), got {self.points.shape}")
        if self.points.shape[0] < 1 or self.marks.shape != (self.points.shape[0],):
            raise ValueError("need one mark per point and at least one point")
        x0, x1, y0, y1 = self.window
        if not (x1 > x0 and y1 > y0):
            raise ValueError("window must have positive area")
        p = self.points
        inside = (p[:, 0] >= x0) & (p[:, 0] <= x1) & (p[:, 1] >= y0) & (p[:, 1] <= y1)
        self.n_outside = int((~inside).sum())
        if self.n_outside:
            warnings.warn(f"{self.n_outside} points fall outside the window; they are still counted", stacklevel=2)

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.window
        return (x1 - x0) * (y1 - y0)


def _k_from_marks(points, marks, r1, r2, h_grid, area):
    i1 = np.flatnonzero(marks == r1)
    i2 = np.flatnonzero(marks == r2)
    n1, n2 = i1.size, i2.size
    if n1 == 0 or n2 == 0:
        raise ValueError(f"both marks must be present (n[{r1}]={n1}, n[{r2}]={n2})")
    dist = cdist(points[i1], points[i2])
    if r1 == r2:
        dist = dist[~np.eye(n1, dtype=bool)]
    dist = np.sort(dist.ravel())
    counts = np.searchsorted(dist, h_grid, side="left")  # strict: d < h
    return area / (n1 + n2) ** 2 * counts


def _check_grid(h_grid):
    h = np.asarray(h_grid, dtype=float)
    if h.ndim != 1 or np.any(h < 0) or np.any(np.diff(h) < 0):
        raise ValueError("h_grid must be a nonnegative increasing 1-D sequence")
    return h


def multitype_k(pattern: MarkedPointPattern, r1, r2, h_grid) -> np.ndarray:
    """Cross-type K estimate without edge correction.

    K(h) = area / (n1 + n2)^2 * #{ordered pairs i != j : mark i = r1, mark j = r2, |x_i - x_j| < h}.
    """
    h = _check_grid(h_grid)
    return _k_from_marks(pattern.points, pattern.marks, r1, r2, h, pattern.area)


@dataclass
class EnvelopeResult:
    h: np.ndarray
    observed: np.ndarray  # (M, H)
    null: np.ndarray  # (M, reps, H)
    lower: np.ndarray
    upper: np.ndarray
    inside: np.ndarray  # (M,) observed curve within [lower, upper] at every h


def k_randomization_envelope(patterns, r1, r2, h_grid, reps_per_draw: int = 10, seed: int | None = None):
    """Observed K curves per pattern plus a mark-permutation envelope.

    For each pattern the labels are shuffled among points marked ``r1`` or
    ``r2`` (sampling without replacement), ``reps_per_draw`` times. Pattern
    ``m`` uses substream ``("kfunc", m)``.
    """
    if reps_per_draw < 1:
        raise ValueError("reps_per_draw must be >= 1")
    h = _check_grid(h_grid)
    observed, null = [], []
    for m, pat in enumerate(patterns):
        rng = substream(seed, "kfunc", m)
        observed.append(_k_from_marks(pat.points, pat.marks, r1, r2, h, pat.area))
        pool = np.flatnonzero((pat.marks == r1) | (pat.marks == r2))
        curves = []
        for _ in range(reps_per_draw):
            marks = pat.marks.copy()
            marks[pool] = rng.permutation(pat.marks[pool])
            curves.append(_k_from_marks(pat.points, marks, r1, r2, h, pat.area))
        null.append(curves)
    observed = np.array(observed)
    null = np.array(null)
    flat = null.reshape(-1, h.size)
    lower, upper = flat.min(axis=0), flat.max(axis=0)
    inside = np.all((observed >= lower) & (observed <= upper), axis=1)
    return EnvelopeResult(h=h, observed=observed, null=null, lower=lower, upper=upper, inside=inside)
