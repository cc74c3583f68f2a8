"""Drive the polarization recursion: synthesize all 2**depth channels
exactly (sharing the tree, with lossless merging), or estimate per-index
reliabilities by genie-aided Monte Carlo when exact synthesis is out of
reach; summarize how the ensemble splits across the five limit classes.

Index convention: entry i (1-based) corresponds to writing i-1 in binary
over `depth` bits, most significant bit first, with 0 as the worse step
and 1 as the better step.  Index 1 is the all-worse channel and index
2**depth the all-better one; consecutive indices differ in the last step
first.  The encoder's bit-reversal keeps this single convention valid on
both the synthesis and decoding sides.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from . import codec
from .channel import Mac
from .errors import AlphabetCapError, ValidationError
from .metrics import (bhattacharyya, info_triple, ml_error_prob,
                      nearest_extremal)
from .transform import (DEFAULT_ALPHABET_CAP, MAX_DEPTH, MINUS, PLUS,
                        mac_minus, mac_plus, marginal_channel, linear_channel,
                        validate_path)

CSV_COLUMNS = ("index", "path", "i1", "i2", "i12", "class", "distance",
               "z_u", "z_v", "z_u_given_v", "z_v_given_u", "pe_joint")


def index_to_path(index: int, depth: int) -> str:
    """Path string for a 1-based entry index at the given depth."""
    if depth < 0 or depth > MAX_DEPTH:
        raise ValidationError(f"depth must lie in [0, {MAX_DEPTH}]")
    if not (1 <= index <= 2 ** depth):
        raise ValidationError(f"index {index} out of range [1, {2 ** depth}]")
    bits = format(index - 1, f"0{depth}b") if depth else ""
    return bits.replace("0", MINUS).replace("1", PLUS)


def path_to_index(path: str) -> int:
    """1-based entry index of a path string."""
    validate_path(path)
    if not path:
        return 1
    return int(path.replace(MINUS, "0").replace(PLUS, "1"), 2) + 1


@dataclass
class ReportEntry:
    """Per-index record of a polarization sweep.

    Exact mode fills the rate triple, its distance to the limit set, and
    exact reliability figures for the marginal/conditional/joint decisions;
    Monte Carlo mode fills the same decision figures with genie estimates
    (plus Wilson intervals) and leaves the triple as NaN.
    """

    index: int
    path: str
    i1: float
    i2: float
    i12: float
    nearest_kind: str | None
    distance: float
    z_u: float
    z_v: float
    z_u_given_v: float
    z_v_given_u: float
    pe_u: float
    pe_v: float
    pe_u_given_v: float
    pe_v_given_u: float
    pe_joint: float
    z_linear_best: float = math.nan
    linear_best: tuple | None = None
    pe_u_slices: tuple = ()
    pe_v_slices: tuple = ()
    wilson: dict | None = None

    def class_at(self, epsilon: float) -> str:
        if math.isnan(self.distance):
            return ""
        if not (0.0 < epsilon < 0.5):
            raise ValidationError(f"epsilon must lie in (0, 0.5), got {epsilon}")
        return self.nearest_kind if self.distance < epsilon else "unpolarized"


@dataclass
class PolarizationReport:
    """All per-index records of one sweep plus its provenance."""

    q: int
    depth: int
    mode: str  # "exact" | "mc"
    entries: list
    seed: int | None = None
    trials: int | None = None

    @property
    def n(self) -> int:
        return 2 ** self.depth

    def mean_i12(self) -> float:
        return float(np.mean([e.i12 for e in self.entries]))

    def unpolarized_fraction(self, delta: float) -> float:
        """Fraction of indices at distance >= delta from the limit set."""
        if self.mode != "exact":
            raise ValidationError(
                "unpolarized fraction needs exact rate triples; "
                "run an exact sweep")
        if delta <= 0:
            raise ValidationError(f"delta must be positive, got {delta}")
        return float(np.mean([e.distance >= delta for e in self.entries]))

    def to_rows(self, epsilon: float) -> list[dict]:
        rows = []
        for e in self.entries:
            if self.mode == "exact":
                triple = {"i1": repr(e.i1), "i2": repr(e.i2), "i12": repr(e.i12),
                          "class": e.class_at(epsilon), "distance": repr(e.distance)}
            else:
                triple = {"i1": "", "i2": "", "i12": "", "class": "",
                          "distance": ""}
            rows.append({
                "index": e.index, "path": e.path, **triple,
                "z_u": repr(e.z_u), "z_v": repr(e.z_v),
                "z_u_given_v": repr(e.z_u_given_v),
                "z_v_given_u": repr(e.z_v_given_u),
                "pe_joint": repr(e.pe_joint),
            })
        return rows

    def write_csv(self, path, epsilon: float) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS,
                                    lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.to_rows(epsilon))

    def write_json(self, path, epsilon: float) -> None:
        payload = {
            "metadata": {
                "q": self.q, "depth": self.depth, "mode": self.mode,
                "seed": self.seed, "trials": self.trials, "epsilon": epsilon,
            },
            "entries": self.to_rows(epsilon),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True, indent=2)
            fh.write("\n")


def synthesize_path(mac: Mac, path: str, *,
                    cap: int = DEFAULT_ALPHABET_CAP) -> Mac:
    """Fold the worse/better transforms along a path string, first step
    first; the empty path returns the channel itself."""
    validate_path(path)
    current = mac
    for pos, step in enumerate(path):
        try:
            if step == MINUS:
                current = mac_minus(current, cap=cap)
            else:
                current = mac_plus(current, cap=cap)
        except AlphabetCapError as exc:
            prefix = path[:pos + 1]
            raise AlphabetCapError(
                f"synthesis failed at path prefix {prefix!r}: {exc}",
                path_prefix=prefix) from exc
    return current


def _linear_best(mac: Mac) -> tuple[float, tuple[int, int]]:
    best_z = math.inf
    best = (0, 1)
    for alpha in range(mac.q):
        for gamma in range(mac.q):
            if alpha == 0 and gamma == 0:
                continue
            z = bhattacharyya(linear_channel(mac, alpha, gamma))
            if z < best_z:
                best_z = z
                best = (alpha, gamma)
    return best_z, best


def _exact_entry(index: int, path: str, leaf: Mac) -> ReportEntry:
    q = leaf.q
    triple = info_triple(leaf)
    kind, distance = nearest_extremal(triple)
    chan_u = marginal_channel(leaf, "U")
    chan_v = marginal_channel(leaf, "V")
    chan_ucond = marginal_channel(leaf, "U|V")
    chan_vcond = marginal_channel(leaf, "V|U")
    # joint ML error over the pair alphabet, same tie-break as the decoder
    pe_joint = float(1.0 - leaf.probs.reshape(q * q, -1).max(axis=0).sum()
                     / (q * q))
    pe_u_slices = tuple(
        float(1.0 - leaf.probs[:, v0, :].max(axis=0).sum() / q)
        for v0 in range(q))
    pe_v_slices = tuple(
        float(1.0 - leaf.probs[u0, :, :].max(axis=0).sum() / q)
        for u0 in range(q))
    z_best, best_pair = _linear_best(leaf)
    return ReportEntry(
        index=index, path=path,
        i1=triple.i1, i2=triple.i2, i12=triple.i12,
        nearest_kind=kind, distance=distance,
        z_u=bhattacharyya(chan_u), z_v=bhattacharyya(chan_v),
        z_u_given_v=bhattacharyya(chan_ucond),
        z_v_given_u=bhattacharyya(chan_vcond),
        pe_u=ml_error_prob(chan_u), pe_v=ml_error_prob(chan_v),
        pe_u_given_v=ml_error_prob(chan_ucond),
        pe_v_given_u=ml_error_prob(chan_vcond),
        pe_joint=pe_joint,
        z_linear_best=z_best, linear_best=best_pair,
        pe_u_slices=pe_u_slices, pe_v_slices=pe_v_slices,
    )


def polarize_exact(mac: Mac, depth: int, *,
                   cap: int = DEFAULT_ALPHABET_CAP) -> PolarizationReport:
    """Exact sweep of all 2**depth synthesized channels.

    The synthesis tree is shared (2**(depth+1) - 1 channels are built, not
    depth * 2**depth); each leaf yields its rate triple, distance to the
    limit set, and exact reliability figures.
    """
    if depth < 0 or depth > MAX_DEPTH:
        raise ValidationError(f"depth must lie in [0, {MAX_DEPTH}]")
    level = [mac]
    for step in range(depth):
        nxt = []
        for node_idx, node in enumerate(level):
            for sign in (MINUS, PLUS):
                prefix = index_to_path(node_idx + 1, step) + sign
                try:
                    nxt.append(mac_minus(node, cap=cap) if sign == MINUS
                               else mac_plus(node, cap=cap))
                except AlphabetCapError as exc:
                    raise AlphabetCapError(
                        f"exact sweep failed at path prefix {prefix!r}: {exc}",
                        path_prefix=prefix) from exc
        level = nxt
    entries = [_exact_entry(i + 1, index_to_path(i + 1, depth), leaf)
               for i, leaf in enumerate(level)]
    return PolarizationReport(q=mac.q, depth=depth, mode="exact",
                              entries=entries)


def genie_estimate(mac: Mac, depth: int, trials: int, seed: int, *,
                   workers: int = 1) -> PolarizationReport:
    """Monte Carlo sweep: encode random blocks, run the genie-aided SC
    recursion feeding true past symbols, and estimate each index's
    marginal, conditional, and joint decision reliabilities.

    Error figures are empirical means with Wilson 95% intervals; the z
    columns hold unbiased pairwise Bhattacharyya statistics of the same
    decisions.  Rate triples are not estimable this way and stay NaN.
    """
    if depth < 0 or depth > MAX_DEPTH:
        raise ValidationError(f"depth must lie in [0, {MAX_DEPTH}]")
    stats = codec.genie_joint_stats(mac, depth, trials, seed, workers=workers)
    err = stats["err"]
    zsum = stats["zsum"]
    entries = []
    for i in range(2 ** depth):
        wilson = {
            name: codec.wilson_interval(int(err[i, col]), trials)
            for col, name in enumerate(
                ("pe_joint", "pe_u", "pe_v", "pe_u_given_v", "pe_v_given_u"))
        }
        entries.append(ReportEntry(
            index=i + 1, path=index_to_path(i + 1, depth),
            i1=math.nan, i2=math.nan, i12=math.nan,
            nearest_kind=None, distance=math.nan,
            z_u=float(zsum[i, 0] / trials), z_v=float(zsum[i, 1] / trials),
            z_u_given_v=float(zsum[i, 2] / trials),
            z_v_given_u=float(zsum[i, 3] / trials),
            pe_joint=float(err[i, 0] / trials),
            pe_u=float(err[i, 1] / trials), pe_v=float(err[i, 2] / trials),
            pe_u_given_v=float(err[i, 3] / trials),
            pe_v_given_u=float(err[i, 4] / trials),
            wilson=wilson,
        ))
    return PolarizationReport(q=mac.q, depth=depth, mode="mc",
                              entries=entries, seed=seed, trials=trials)


_RATE_PER_KIND = {"t000": 0, "t011": 1, "t101": 1, "t111": 1, "t112": 2,
                  "unpolarized": 0}


def polarization_stats(report: PolarizationReport, delta: float) -> dict:
    """Summary of an exact sweep at threshold delta: unpolarized fraction,
    per-kind counts, and the sum rate the selection rules would achieve."""
    if report.mode != "exact":
        raise ValidationError("polarization statistics need an exact sweep")
    if not (0.0 < delta < 0.5):
        raise ValidationError(f"delta must lie in (0, 0.5), got {delta}")
    counts = {kind: 0 for kind in _RATE_PER_KIND}
    for entry in report.entries:
        counts[entry.class_at(delta)] += 1
    n = report.n
    sum_rate = sum(_RATE_PER_KIND[k] * c for k, c in counts.items()) / n
    return {
        "unpolarized_fraction": counts["unpolarized"] / n,
        "counts": counts,
        "sum_rate": sum_rate,
        "mean_i12": report.mean_i12(),
    }
