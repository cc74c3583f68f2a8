"""Information functionals of MACs and point channels.

All mutual informations and entropies are in base-q units (q-ary symbols
per channel use), so single-user quantities live in [0, 1] and the joint
rate in [0, 2].  Inputs are always independent and uniform on F_q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .channel import Mac, PointChannel
from .errors import ValidationError

POLYMATROID_TOL = 1e-9

# The five limit points of (i1, i2, i12), in the fixed tie-break order.
EXTREMAL_POINTS = {
    "t000": np.array([0.0, 0.0, 0.0]),
    "t011": np.array([0.0, 1.0, 1.0]),
    "t101": np.array([1.0, 0.0, 1.0]),
    "t111": np.array([1.0, 1.0, 1.0]),
    "t112": np.array([1.0, 1.0, 2.0]),
}
_KIND_ORDER = tuple(EXTREMAL_POINTS)
_POINT_MATRIX = np.stack([EXTREMAL_POINTS[k] for k in _KIND_ORDER])


@dataclass(frozen=True)
class InfoTriple:
    """(I(X;YW), I(W;YX), I(XW;Y)) for uniform independent inputs."""

    i1: float
    i2: float
    i12: float

    def __post_init__(self):
        lo = -POLYMATROID_TOL
        if not (lo <= self.i1 <= 1 + POLYMATROID_TOL
                and lo <= self.i2 <= 1 + POLYMATROID_TOL
                and lo <= self.i12 <= 2 + POLYMATROID_TOL):
            raise ValidationError(f"rate triple out of range: {self}")
        if max(self.i1, self.i2) > self.i12 + POLYMATROID_TOL:
            raise ValidationError(
                f"polymatroid violation: max(i1, i2) > i12 in {self}")
        if self.i12 > self.i1 + self.i2 + POLYMATROID_TOL:
            raise ValidationError(
                f"polymatroid violation: i12 > i1 + i2 in {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.i1, self.i2, self.i12])


@dataclass(frozen=True)
class ExtremalClass:
    """Nearest limit point and Euclidean distance to the set of five."""

    kind: str
    distance: float


def _entropy(p: np.ndarray, q: int) -> float:
    return float(-xlogy(p, p).sum() / math.log(q))


def info_triple(mac: Mac) -> InfoTriple:
    """Exact rate triple of a MAC, computed from its table."""
    q = mac.q
    joint = mac.probs / (q * q)
    h_all = _entropy(joint, q)
    h_yw = _entropy(joint.sum(axis=0), q)
    h_xy = _entropy(joint.sum(axis=1), q)
    h_y = _entropy(joint.sum(axis=(0, 1)), q)
    # chain rules with H(X) = H(W) = 1 and H(XW) = 2 under uniform inputs
    return InfoTriple(i1=1.0 + h_yw - h_all,
                      i2=1.0 + h_xy - h_all,
                      i12=2.0 + h_y - h_all)


def point_info(chan: PointChannel) -> float:
    """Mutual information I(Q) across a point channel, uniform input."""
    q = chan.q
    p_out = chan.probs.mean(axis=0)
    h_rows = -xlogy(chan.probs, chan.probs).sum() / q
    return float((_entropy(p_out, q) - h_rows / math.log(q)))


def bhattacharyya(chan: PointChannel) -> float:
    """Average pairwise Bhattacharyya parameter Z(Q) in [0, 1]."""
    q = chan.q
    s = np.sqrt(chan.probs)
    gram = s @ s.T
    total = gram.sum() - np.trace(gram)
    return float(total / (q * (q - 1)))


def ml_error_prob(chan: PointChannel) -> float:
    """Exact error probability of the maximum-likelihood decision under
    uniform input; ties resolve to the lexicographically smallest input."""
    return float(1.0 - chan.probs.max(axis=0).sum() / chan.q)


def classify(triple: InfoTriple, epsilon: float) -> ExtremalClass:
    """Nearest of the five limit points; 'unpolarized' when no point lies
    within epsilon (Euclidean norm)."""
    if not (0.0 < epsilon < 0.5):
        raise ValidationError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    kind, distance = nearest_extremal(triple)
    if distance >= epsilon:
        return ExtremalClass(kind="unpolarized", distance=distance)
    return ExtremalClass(kind=kind, distance=distance)


def nearest_extremal(triple: InfoTriple) -> tuple[str, float]:
    """Closest limit point (first in fixed order on ties) and its distance."""
    d = np.linalg.norm(_POINT_MATRIX - triple.as_array()[None, :], axis=1)
    idx = int(np.argmin(d))
    return _KIND_ORDER[idx], float(d[idx])


def region_vertices(triple: InfoTriple) -> list[tuple[float, float]]:
    """Vertices of the pentagon {0<=R1<=i1, 0<=R2<=i2, R1+R2<=i12} in
    counterclockwise order starting at the origin.

    Includes the dominant-face endpoints (i1, i12-i1) and (i12-i2, i2);
    degenerate regions collapse to fewer than five vertices.
    """
    i1, i2, i12 = triple.i1, triple.i2, triple.i12
    candidates = [
        (0.0, 0.0),
        (i1, 0.0),
        (i1, max(i12 - i1, 0.0)),
        (max(i12 - i2, 0.0), i2),
        (0.0, i2),
    ]
    vertices: list[tuple[float, float]] = []
    for v in candidates:
        if all(abs(v[0] - u[0]) > 1e-12 or abs(v[1] - u[1]) > 1e-12
               for u in vertices):
            vertices.append((float(v[0]), float(v[1])))
    return vertices
