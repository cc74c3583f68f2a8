"""Channel syntheses: the two-user worse/better transforms, single-user
marginal and linear-combination channels, and the single-user pair
transforms they reduce to.

Every synthesis canonicalizes its output immediately; without merging the
output alphabet would square at each recursion level.  Merging is lossless
(only proportional columns are combined), so exactness is preserved.  A
hard cap bounds the post-merge alphabet; exceeding it (or building an
unworkably large pre-merge table) raises AlphabetCapError, directing the
caller to the Monte Carlo estimation path.
"""

from __future__ import annotations

import numpy as np

from .channel import Mac, PointChannel, merge_columns
from .errors import AlphabetCapError, ValidationError

DEFAULT_ALPHABET_CAP = 10 ** 6
# budget on pre-merge table entries (inputs x outputs) for one synthesis
MAX_SYNTH_ENTRIES = 2 * 10 ** 7

MINUS = "-"
PLUS = "+"
MAX_DEPTH = 20


def validate_path(path: str, max_depth: int = MAX_DEPTH) -> str:
    """A transform path is a string over {-, +}, bounded in length."""
    if not isinstance(path, str):
        raise ValidationError(f"path must be a string over {{-,+}}, got {path!r}")
    if any(c not in (MINUS, PLUS) for c in path):
        raise ValidationError(f"path may only contain '-' and '+': {path!r}")
    if len(path) > max_depth:
        raise ValidationError(
            f"path length {len(path)} exceeds depth cap {max_depth}")
    return path


def _check_budget(premerge_cols: int, inputs: int, what: str):
    if premerge_cols * inputs > MAX_SYNTH_ENTRIES:
        raise AlphabetCapError(
            f"{what}: pre-merge table would hold {premerge_cols * inputs} entries "
            f"(budget {MAX_SYNTH_ENTRIES}); exact synthesis is infeasible here, "
            "use the Monte Carlo estimation path instead")


def _check_cap(count: int, cap: int, what: str):
    if count > cap:
        raise AlphabetCapError(
            f"{what}: merged output alphabet has {count} symbols, exceeding the "
            f"cap of {cap}; use the Monte Carlo estimation path instead")


def mac_minus(mac: Mac, *, cap: int = DEFAULT_ALPHABET_CAP) -> Mac:
    """Worse channel synthesized from two independent uses:
    P'(y1,y2 | u1,v1) = (1/q^2) sum_{u2,v2} P(y1 | u1+u2, v1+v2) P(y2 | u2,v2).
    """
    q, outputs = mac.q, mac.output_count
    _check_budget(outputs * outputs, q * q, "minus transform")
    probs = mac.probs
    out = np.zeros((q, q, outputs, outputs))
    for u2 in range(q):
        for v2 in range(q):
            # shifted[u1, v1, y1] = P(y1 | u1+u2, v1+v2)
            shifted = np.roll(np.roll(probs, -u2, axis=0), -v2, axis=1)
            out += shifted[:, :, :, None] * probs[u2, v2][None, None, None, :]
    out /= q * q
    merged = merge_columns(out.reshape(q * q, outputs * outputs))
    _check_cap(merged.shape[1], cap, "minus transform")
    return Mac(q=q, probs=merged.reshape(q, q, -1))


def mac_plus(mac: Mac, *, cap: int = DEFAULT_ALPHABET_CAP) -> Mac:
    """Better channel (genie provides (u1, v1) at the output):
    P'(y1,y2,u1,v1 | u2,v2) = (1/q^2) P(y1 | u1+u2, v1+v2) P(y2 | u2,v2).
    """
    q, outputs = mac.q, mac.output_count
    _check_budget(q * q * outputs * outputs, q * q, "plus transform")
    probs = mac.probs
    blocks = []
    for u1 in range(q):
        for v1 in range(q):
            shifted = np.roll(np.roll(probs, -u1, axis=0), -v1, axis=1)
            block = shifted[:, :, :, None] * probs[:, :, None, :]
            blocks.append(block.reshape(q * q, outputs * outputs))
    raw = np.concatenate(blocks, axis=1) / (q * q)
    merged = merge_columns(raw)
    _check_cap(merged.shape[1], cap, "plus transform")
    return Mac(q=q, probs=merged.reshape(q, q, -1))


MARGINALS = ("U", "V", "U|V", "V|U")


def marginal_channel(mac: Mac, which: str) -> PointChannel:
    """One user's point channel.

    "U" averages the other input away; "U|V" reveals it at the output
    (output index y*q + v).  "V" and "V|U" are the mirror images.
    """
    q = mac.q
    if which == "U":
        table = mac.probs.mean(axis=1)
    elif which == "V":
        table = mac.probs.mean(axis=0)
    elif which == "U|V":
        # rows over u; output (y, v) flattened as y*q + v
        table = mac.probs.transpose(0, 2, 1).reshape(q, -1) / q
    elif which == "V|U":
        table = mac.probs.transpose(1, 2, 0).reshape(q, -1) / q
    else:
        raise ValidationError(
            f"unknown marginal {which!r}; expected one of {MARGINALS}")
    return PointChannel(q=q, probs=table)


def linear_channel(mac: Mac, alpha: int, gamma: int) -> PointChannel:
    """The channel alpha*u + gamma*v -> y:
    Q(y | s) = (1/q) sum_{u,v: alpha u + gamma v = s} P(y | u, v).

    Each fiber {alpha u + gamma v = s} holds exactly q input pairs, so the
    rows are stochastic.  (alpha, gamma) = (0, 0) is rejected.
    """
    q = mac.q
    if not (0 <= alpha < q and 0 <= gamma < q):
        raise ValidationError(
            f"coefficients must lie in [0, {q - 1}]: ({alpha}, {gamma})")
    if alpha == 0 and gamma == 0:
        raise ValidationError("linear channel needs (alpha, gamma) != (0, 0)")
    table = np.zeros((q, mac.output_count))
    for u in range(q):
        for v in range(q):
            s = (alpha * u + gamma * v) % q
            table[s] += mac.probs[u, v]
    return PointChannel(q=q, probs=table / q)


def point_b(chan: PointChannel, *, cap: int = DEFAULT_ALPHABET_CAP) -> PointChannel:
    """Single-user worse transform:
    Q'(y1,y2 | x1) = (1/q) sum_{x2} Q(y1 | x1+x2) Q(y2 | x2)."""
    q, outputs = chan.q, chan.output_count
    _check_budget(outputs * outputs, q, "b transform")
    probs = chan.probs
    out = np.zeros((q, outputs, outputs))
    for x2 in range(q):
        shifted = np.roll(probs, -x2, axis=0)
        out += shifted[:, :, None] * probs[x2][None, None, :]
    out /= q
    merged = merge_columns(out.reshape(q, outputs * outputs))
    _check_cap(merged.shape[1], cap, "b transform")
    return PointChannel(q=q, probs=merged)


def point_g(chan: PointChannel, *, cap: int = DEFAULT_ALPHABET_CAP) -> PointChannel:
    """Single-user better transform:
    Q'(y1,y2,x1 | x2) = (1/q) Q(y1 | x1+x2) Q(y2 | x2)."""
    q, outputs = chan.q, chan.output_count
    _check_budget(q * outputs * outputs, q, "g transform")
    probs = chan.probs
    blocks = []
    for x1 in range(q):
        shifted = np.roll(probs, -x1, axis=0)
        blocks.append((shifted[:, :, None] * probs[:, None, :])
                      .reshape(q, outputs * outputs))
    raw = np.concatenate(blocks, axis=1) / q
    merged = merge_columns(raw)
    _check_cap(merged.shape[1], cap, "g transform")
    return PointChannel(q=q, probs=merged)
