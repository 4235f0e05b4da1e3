"""Left/right feature correspondence by relative-geometry alignment.

Each feature is described by the sorted offsets to every other feature in
its own image. Candidate pairs are ranked by how well those descriptors
agree and accepted greedily, lowest error first.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AmbiguousCorrespondenceError

MISSING_OFFSET_PENALTY = 100.0  # px per unmatched offset


@dataclass(frozen=True)
class Correspondence:
    pairs: tuple[tuple[int, int], ...]
    residual: float

    def __post_init__(self):
        left = [i for i, _ in self.pairs]
        right = [j for _, j in self.pairs]
        if len(set(left)) != len(left) or len(set(right)) != len(right):
            raise ValueError(f"non-injective correspondence {self.pairs}")


def _centers(features) -> np.ndarray:
    pts = [getattr(f, "center", f) for f in features]
    return np.asarray(pts, dtype=float).reshape(len(pts), 2)


def relative_geometry(features) -> list[np.ndarray]:
    """Per feature, offsets to all other features sorted by (magnitude, angle).

    Accepts :class:`~stereomocap.detect.Feature` objects or raw ``(u, v)``
    pairs.
    """
    c = _centers(features)
    if len(c) == 0:
        raise ValueError("need at least one feature")
    out = []
    for i in range(len(c)):
        off = np.delete(c, i, axis=0) - c[i]
        order = np.lexsort((np.arctan2(off[:, 1], off[:, 0]), np.hypot(off[:, 0], off[:, 1])))
        out.append(off[order])
    return out


def geometry_error(a: np.ndarray, b: np.ndarray) -> float:
    """Sum of distances between order-matched offsets, plus a per-missing penalty."""
    m = min(len(a), len(b))
    err = float(np.sum(np.hypot(*(a[:m] - b[:m]).T))) if m else 0.0
    return err + MISSING_OFFSET_PENALTY * abs(len(a) - len(b))


def error_matrix(left, right) -> np.ndarray:
    gl, gr = relative_geometry(left), relative_geometry(right)
    return np.array([[geometry_error(a, b) for b in gr] for a in gl])


def match(left: Sequence, right: Sequence) -> Correspondence:
    """Greedy lowest-error pairing of left and right features.

    All ``(i, j)`` candidates are sorted by geometry error and accepted while
    both indices are unused, until ``min(len(left), len(right))`` pairs exist.

    The greedy pass always fills that quota, so ambiguity is decided by an
    optimality certificate instead: each feature on the smaller side must be
    paired with one of its own lowest-error partners. The sum of those row
    minima bounds every injective assignment from below, so a certified
    result is a minimum-error assignment. Otherwise two features competed
    for the same partner and :class:`AmbiguousCorrespondenceError` is raised.
    """
    if len(left) == 0 or len(right) == 0:
        raise ValueError("both feature lists must be nonempty")
    E = error_matrix(left, right)
    shortest = min(E.shape)
    order = np.argsort(E, axis=None, kind="stable")
    used_l, used_r, pairs = set(), set(), []
    for flat in order:
        i, j = divmod(int(flat), E.shape[1])
        if i in used_l or j in used_r:
            continue
        used_l.add(i)
        used_r.add(j)
        pairs.append((i, j))
        if len(pairs) == shortest:
            break
    else:
        raise AmbiguousCorrespondenceError("assignments exhausted before every feature was paired")

    small_axis_is_left = E.shape[0] <= E.shape[1]
    best = E.min(axis=1) if small_axis_is_left else E.min(axis=0)
    for i, j in pairs:
        k = i if small_axis_is_left else j
        if E[i, j] > best[k]:
            raise AmbiguousCorrespondenceError(
                f"feature {k} on the {'left' if small_axis_is_left else 'right'} lost its best partner "
                f"(error {E[i, j]:.3f} px vs {best[k]:.3f} px)"
            )
    pairs.sort()
    return Correspondence(tuple(pairs), float(sum(E[i, j] for i, j in pairs)))
