"""Marker detection: global threshold, infilled outer contours, ellipse fit."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import ndimage

from .errors import DegenerateFitError, TooManyFeaturesError
from .scene import Frame, write_pgm

_EIGHT = np.ones((3, 3), dtype=bool)

# Clockwise (on screen, rows grow downward) neighbor offsets as (drow, dcol),
# starting from west.
_MOORE = ((0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1))


@dataclass(frozen=True)
class DetectParams:
    intensity_threshold: float = 0.5
    min_area: float = 4.0
    max_area: float = 10_000.0
    max_features: int = 32

    def __post_init__(self):
        if not 0.0 < self.intensity_threshold < 1.0:
            raise ValueError("intensity_threshold must lie in (0, 1)")
        if not 0.0 < self.min_area < self.max_area:
            raise ValueError("need 0 < min_area < max_area")
        if self.max_features < 1:
            raise ValueError("max_features must be >= 1")


@dataclass(frozen=True, eq=False)
class Contour:
    """Closed 8-connected boundary of one infilled component.

    ``points`` is an ``(N, 2)`` array of pixel-center ``(u, v)`` coordinates
    in tracing order; ``area`` is the filled pixel count.
    """

    points: np.ndarray
    area: int


@dataclass(frozen=True, eq=False)
class Feature:
    center: np.ndarray
    radius: float
    area: float

    def __post_init__(self):
        if not (self.radius > 0 and self.area > 0):
            raise ValueError("feature radius and area must be positive")


def threshold(frame: Frame | np.ndarray, level: float) -> np.ndarray:
    if not 0.0 < level < 1.0:
        raise ValueError("threshold level must lie in (0, 1)")
    img = frame.intensities if isinstance(frame, Frame) else np.asarray(frame)
    return img >= level


def trace_boundary(mask: np.ndarray) -> np.ndarray:
    """Moore-neighbor trace of the single 8-connected component in ``mask``.

    Returns ``(N, 2)`` ``(u, v)`` coordinates starting at the top-left-most
    pixel and proceeding clockwise. Terminates when the first move repeats.
    """
    padded = np.pad(mask, 1)
    rows, cols = np.nonzero(padded)
    if rows.size == 0:
        raise ValueError("empty component")
    start = (int(rows[0]), int(cols[0]))  # raster-first: its west neighbor is background
    chain = [start]
    cur, back = start, (start[0], start[1] - 1)
    first_move = None
    for _ in range(8 * rows.size + 8):
        d0 = _MOORE.index((back[0] - cur[0], back[1] - cur[1]))
        nxt = None
        for k in range(1, 9):
            dr, dc = _MOORE[(d0 + k) % 8]
            cand = (cur[0] + dr, cur[1] + dc)
            if padded[cand]:
                nxt = cand
                pr, pc = _MOORE[(d0 + k - 1) % 8]
                back = (cur[0] + pr, cur[1] + pc)
                break
        if nxt is None:  # isolated pixel
            break
        if first_move is None:
            first_move = (cur, nxt)
        elif (cur, nxt) == first_move:
            chain.pop()  # drop the repeated start
            break
        chain.append(nxt)
        cur = nxt
    pts = np.array(chain, dtype=float) - 1.0
    return pts[:, ::-1].copy()


def fill_holes(binary: np.ndarray) -> np.ndarray:
    """Fill background regions (4-connected) that do not reach the image border."""
    labels, _ = ndimage.label(~binary)
    border = np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]]))
    holes = ~np.isin(labels, border)
    return binary | holes


def extract_outer_contours(binary: np.ndarray, params: DetectParams = DetectParams()) -> list[Contour]:
    """Boundaries of the infilled foreground components that pass the area gate.

    Holes are filled before labeling, so a ring yields a single contour and
    nothing nested inside it survives. Components touching the image border
    are dropped.
    """
    binary = np.asarray(binary, dtype=bool)
    if binary.size == 0:
        raise ValueError("empty image")
    filled = fill_holes(binary)
    labels, n = ndimage.label(filled, structure=_EIGHT)
    h, w = filled.shape
    kept = []
    for idx, sl in enumerate(ndimage.find_objects(labels), start=1):
        if sl[0].start == 0 or sl[1].start == 0 or sl[0].stop == h or sl[1].stop == w:
            continue
        comp = labels[sl] == idx
        area = int(comp.sum())
        if not params.min_area <= area <= params.max_area:
            continue
        kept.append((sl, comp, area))
    if len(kept) > params.max_features:
        raise TooManyFeaturesError(f"{len(kept)} components exceed max_features={params.max_features}")
    contours = []
    for sl, comp, area in kept:
        pts = trace_boundary(comp)
        pts += (sl[1].start, sl[0].start)
        contours.append(Contour(pts, area))
    return contours


def fit_ellipse(points) -> tuple[np.ndarray, float, float, float]:
    """Direct least-squares ellipse fit (Fitzgibbon, in Halir-Flusser form).

    Returns ``(center, semi_major, semi_minor, angle)``. Coordinates are
    centered and isotropically scaled before fitting so the result is
    translation- and scale-equivariant.
    """
    pts = np.asarray(points, dtype=float)
    if len(pts) < 6:
        raise DegenerateFitError(f"need >= 6 boundary points, got {len(pts)}")
    mean = pts.mean(axis=0)
    scale = math.sqrt(np.mean(np.sum((pts - mean) ** 2, axis=1)) / 2.0)
    if scale == 0.0:
        raise DegenerateFitError("all boundary points coincide")
    x, y = ((pts - mean) / scale).T
    D1 = np.column_stack([x * x, x * y, y * y])
    D2 = np.column_stack([x, y, np.ones_like(x)])
    S1, S2, S3 = D1.T @ D1, D1.T @ D2, D2.T @ D2
    try:
        T = -np.linalg.solve(S3, S2.T)
    except np.linalg.LinAlgError as exc:
        raise DegenerateFitError("collinear boundary") from exc
    M = S1 + S2 @ T
    M = np.array([M[2] / 2.0, -M[1], M[0] / 2.0])
    with np.errstate(all="ignore"):
        evals, evecs = np.linalg.eig(M)
    evecs = np.real(evecs)
    cond = 4.0 * evecs[0] * evecs[2] - evecs[1] ** 2
    ok = np.flatnonzero((cond > 0) & np.isfinite(cond))
    if ok.size == 0:
        raise DegenerateFitError("conic is not an ellipse")
    a1 = evecs[:, ok[0]]
    a, b, c = a1
    d, e, f = T @ a1
    den = b * b - 4.0 * a * c
    x0 = (2.0 * c * d - b * e) / den
    y0 = (2.0 * a * e - b * d) / den
    F0 = a * x0 * x0 + b * x0 * y0 + c * y0 * y0 + d * x0 + e * y0 + f
    lam, vec = np.linalg.eigh(np.array([[a, b / 2.0], [b / 2.0, c]]))
    with np.errstate(all="ignore"):
        axes = np.sqrt(-F0 / lam)
    if not np.all(np.isfinite(axes)) or np.any(axes <= 0):
        raise DegenerateFitError("imaginary ellipse")
    major = int(np.argmax(axes))
    angle = math.atan2(vec[1, major], vec[0, major])
    center = mean + scale * np.array([x0, y0])
    return center, scale * axes[major], scale * axes[1 - major], angle


def fit_feature(contour: Contour) -> Feature:
    """Ellipse-fit a contour; radius is the mean of the two semi-axes."""
    center, a, b, _ = fit_ellipse(contour.points)
    return Feature(center, (a + b) / 2.0, float(contour.area))


def detect(frame: Frame, params: DetectParams = DetectParams(), debug_dir: Optional[Path] = None, tag: str = "") -> list[Feature]:
    """Features sorted by descending area (ties by position).

    Contours whose ellipse fit degenerates are skipped. With ``debug_dir``
    set, the threshold mask, infilled mask and traced contours are written
    there as PGM files prefixed by ``tag``.
    """
    binary = threshold(frame, params.intensity_threshold)
    contours = extract_outer_contours(binary, params)
    feats = []
    for c in contours:
        try:
            feats.append(fit_feature(c))
        except DegenerateFitError:
            continue
    feats.sort(key=lambda f: (-f.area, f.center[1], f.center[0]))
    if debug_dir is not None:
        debug_dir = Path(debug_dir)
        debug_dir.mkdir(parents=True, exist_ok=True)
        write_pgm(debug_dir / f"{tag}threshold.pgm", binary)
        write_pgm(debug_dir / f"{tag}filled.pgm", fill_holes(binary))
        edges = np.zeros_like(binary)
        for c in contours:
            u, v = c.points.astype(int).T
            edges[v, u] = True
        write_pgm(debug_dir / f"{tag}contours.pgm", edges)
    return feats
