"""Two-user MACs and single-user point channels as finite probability tables.

A two-user channel is a table P(y|x,w) over input pairs (x, w) in F_q x F_q
and an opaque output index y; a point channel is a table Q(y|x).  Outputs
carry no semantics beyond their index (synthesized channels have composite
outputs, so tables stay flat).  Channels are immutable after construction
and shareable across threads.

The normative on-disk format is JSON:
    {"q": int, "outputs": int, "probs": [[row per (x, w)]]}
with rows listed in lexicographic (x, w) order, x major.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .field import FieldSpec

ROW_SUM_TOL = 1e-9       # construction-time validation of row sums
MERGE_TOL = 1e-12        # proportional-column detection in canonicalize
CANONICAL_EQ_TOL = 1e-9  # entry-wise comparison of canonical forms

EXTREMAL_KINDS = ("useless", "user1-perfect", "user2-perfect", "contention", "perfect")


def _validate_table(probs: np.ndarray, rows: int, what: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2 or probs.shape[0] != rows:
        raise ValidationError(
            f"{what}: expected {rows} rows, got shape {probs.shape}")
    if probs.shape[1] < 1:
        raise ValidationError(f"{what}: output alphabet must be nonempty")
    neg = np.argwhere(probs < 0.0)
    if neg.size:
        r, c = neg[0]
        raise ValidationError(
            f"{what}: negative entry {probs[r, c]} at row {r}, output {c}")
    sums = probs.sum(axis=1)
    bad = np.argwhere(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        r = int(bad[0][0])
        raise ValidationError(
            f"{what}: row {r} sums to {sums[r]!r}, expected 1 within {ROW_SUM_TOL}")
    return probs


@dataclass
class Mac:
    """A two-user q-ary-input MAC: probs[x, w, y] = P(y | x, w)."""

    q: int
    probs: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        FieldSpec(self.q)
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 3 or probs.shape[:2] != (self.q, self.q):
            raise ValidationError(
                f"MAC table must have shape (q, q, outputs), got {probs.shape}")
        flat = _validate_table(probs.reshape(self.q * self.q, -1),
                               self.q * self.q, "MAC")
        probs = flat.reshape(self.q, self.q, -1)
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        if self.labels is not None and len(self.labels) != self.output_count:
            raise ValidationError("labels length must match output count")

    @property
    def output_count(self) -> int:
        return self.probs.shape[2]

    def row(self, x: int, w: int) -> np.ndarray:
        return self.probs[x, w]


@dataclass
class PointChannel:
    """A single-user q-ary-input channel: probs[a, b] = Q(b | a)."""

    q: int
    probs: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        FieldSpec(self.q)
        probs = _validate_table(np.asarray(self.probs, dtype=np.float64),
                                self.q, "point channel")
        probs.flags.writeable = False
        object.__setattr__(self, "probs", probs)
        if self.labels is not None and len(self.labels) != self.output_count:
            raise ValidationError("labels length must match output count")

    @property
    def output_count(self) -> int:
        return self.probs.shape[1]


def mac_from_table(q: int, probs) -> Mac:
    """Build a validated Mac from q*q rows in lexicographic (x, w) order."""
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim == 2:
        if arr.shape[0] != q * q:
            raise ValidationError(
                f"expected {q * q} rows for q={q}, got {arr.shape[0]}")
        arr = arr.reshape(q, q, -1)
    return Mac(q=q, probs=arr)


def build_adder_mac(q: int, flip_prob: float = 0.0) -> Mac:
    """Integer-sum MAC: Y = x + w over {0, ..., 2(q-1)}.

    With flip_prob > 0 the output is replaced by a uniformly random
    *other* symbol with that probability.
    """
    FieldSpec(q)
    if not (0.0 <= flip_prob < 1.0):
        raise ValidationError(f"flip_prob must lie in [0, 1), got {flip_prob}")
    outputs = 2 * q - 1
    probs = np.zeros((q, q, outputs))
    for x in range(q):
        for w in range(q):
            s = x + w
            if flip_prob == 0.0:
                probs[x, w, s] = 1.0
            else:
                probs[x, w, :] = flip_prob / (outputs - 1)
                probs[x, w, s] = 1.0 - flip_prob
    return Mac(q=q, probs=probs)


def build_extremal_mac(kind: str) -> Mac:
    """A q=2 MAC sitting exactly on one of the five limit points.

    kinds: useless (0,0,0), user1-perfect (1,0,1), user2-perfect (0,1,1),
    contention (1,1,1, realized as Y = x XOR w), perfect (1,1,2).
    """
    if kind == "useless":
        probs = np.full((2, 2, 2), 0.5)
    elif kind == "user1-perfect":
        probs = np.zeros((2, 2, 2))
        for x in range(2):
            for w in range(2):
                probs[x, w, x] = 1.0
    elif kind == "user2-perfect":
        probs = np.zeros((2, 2, 2))
        for x in range(2):
            for w in range(2):
                probs[x, w, w] = 1.0
    elif kind == "contention":
        probs = np.zeros((2, 2, 2))
        for x in range(2):
            for w in range(2):
                probs[x, w, x ^ w] = 1.0
    elif kind == "perfect":
        probs = np.zeros((2, 2, 4))
        for x in range(2):
            for w in range(2):
                probs[x, w, 2 * x + w] = 1.0
    else:
        raise ValidationError(
            f"unknown extremal kind {kind!r}; expected one of {EXTREMAL_KINDS}")
    return Mac(q=2, probs=probs)


def merge_columns(cols: np.ndarray, merge_tol: float = MERGE_TOL) -> np.ndarray:
    """Canonical form of a column table: merge proportional outputs, drop
    zero-mass outputs, sort by (normalized column, mass).

    cols has one row per input and one column per output.  Two outputs are
    merged when their mass-normalized columns agree within merge_tol in
    max norm; merging such columns loses no information about the input.
    """
    cols = np.asarray(cols, dtype=np.float64)
    mass = cols.sum(axis=0)
    keep = mass > 0.0
    cols = cols[:, keep]
    mass = mass[keep]
    if cols.shape[1] == 0:
        raise ValidationError("channel has no outputs with positive mass")
    normalized = cols / mass
    # lexsort: last key is primary, so feed rows bottom-up
    order = np.lexsort(normalized[::-1])
    cols = cols[:, order]
    normalized = normalized[:, order]
    if cols.shape[1] > 1:
        gap = np.abs(np.diff(normalized, axis=1)).max(axis=0)
        starts = np.flatnonzero(np.concatenate(([True], gap > merge_tol)))
    else:
        starts = np.array([0])
    merged = np.add.reduceat(cols, starts, axis=1)
    mmass = merged.sum(axis=0)
    mnorm = merged / mmass
    keys = np.vstack([mmass[None, :], mnorm[::-1]])
    return merged[:, np.lexsort(keys)]


def canonicalize(channel):
    """Merge equivalent outputs and sort columns into a canonical order.

    Idempotent; preserves every information functional of the channel.
    Two channels are output-relabeling/merging equivalent iff their
    canonical tables are entry-wise equal (within CANONICAL_EQ_TOL).
    Labels do not survive merging.
    """
    if isinstance(channel, Mac):
        q = channel.q
        merged = merge_columns(channel.probs.reshape(q * q, -1))
        return Mac(q=q, probs=merged.reshape(q, q, -1))
    if isinstance(channel, PointChannel):
        merged = merge_columns(channel.probs)
        return PointChannel(q=channel.q, probs=merged)
    raise ValidationError(f"cannot canonicalize {type(channel).__name__}")


def mac_to_dict(mac: Mac) -> dict:
    return {
        "q": int(mac.q),
        "outputs": int(mac.output_count),
        "probs": [[float(v) for v in mac.probs[x, w]]
                  for x in range(mac.q) for w in range(mac.q)],
    }


def mac_from_dict(data: dict) -> Mac:
    try:
        q = int(data["q"])
        outputs = int(data["outputs"])
        probs = data["probs"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed channel spec: {exc}") from exc
    arr = np.asarray(probs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != outputs:
        raise ValidationError(
            f"channel spec: probs shape {arr.shape} does not match outputs={outputs}")
    return mac_from_table(q, arr)


def save_mac(mac: Mac, path) -> None:
    with open(path, "w") as fh:
        json.dump(mac_to_dict(mac), fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_mac(path) -> Mac:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"channel spec {path}: invalid JSON: {exc}") from exc
    return mac_from_dict(data)
