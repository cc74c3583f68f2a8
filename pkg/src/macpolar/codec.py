"""Polar code construction, encoding, joint successive-cancellation
decoding, and block-error simulation for two-user MACs, plus the
rate-splitting corner-point scheme built from two single-user codes.

The encoder maps a length-n message vector u over F_q to the codeword
obtained by bit-reversing the index order and applying the standard
butterfly network, in O(n log n) symbol operations; a dense-matrix
reference path exists for tests.

The joint decoder treats an input pair (u, v) as one symbol of the
product group F_q x F_q and runs a single successive-cancellation
recursion over that group; its check/variable combinations are exactly
the two-user worse/better channel syntheses applied pointwise, so the
genie-aided decision at index i sees precisely the i-th synthesized
channel.  Likelihood vectors are renormalized at every node, which keeps
depth-l products from underflowing and leaves argmax decisions intact.

All randomness derives from a single 64-bit seed through fixed
(seed, purpose, chunk) spawn keys; Monte Carlo runs are chunked in
fixed-size blocks so results are byte-identical for any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import Mac, PointChannel
from .errors import AlphabetCapError, ValidationError
from .metrics import bhattacharyya, ml_error_prob
from .transform import (DEFAULT_ALPHABET_CAP, marginal_channel, point_b,
                        point_g)

# purpose codes for deterministic stream splitting: rng streams are
# default_rng(SeedSequence((seed, purpose, chunk_index)))
PURPOSE_FROZEN = 0
PURPOSE_SIMULATE = 1
PURPOSE_GENIE = 2
PURPOSE_CORNER_FROZEN_1 = 3
PURPOSE_CORNER_FROZEN_2 = 4
PURPOSE_CORNER_SIMULATE = 5
PURPOSE_GENIE_POINT_1 = 6
PURPOSE_GENIE_POINT_2 = 7

CHUNK_TRIALS = 512  # fixed Monte Carlo chunk; independent of worker count

_WILSON_Z95 = 1.959963984540054


def _rng_for(seed: int, purpose: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, purpose, index)))


def wilson_interval(successes: int, trials: int,
                    z: float = _WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 95%)."""
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    zz = z * z
    denom = 1.0 + zz / trials
    center = (p + zz / (2.0 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + zz / (4.0 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


# ---------------------------------------------------------------------------
# encoder
# ---------------------------------------------------------------------------

def bit_reversal_perm(n: int) -> np.ndarray:
    """Permutation sending index b_{l-1}...b_0 to its digit reversal."""
    if n < 1 or (n & (n - 1)) != 0:
        raise ValidationError(f"block length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    perm = np.zeros(n, dtype=np.int64)
    for j in range(n):
        r = 0
        x = j
        for _ in range(bits):
            r = (r << 1) | (x & 1)
            x >>= 1
        perm[j] = r
    return perm


def generator_matrix(n: int) -> np.ndarray:
    """Dense reference: bit-reversal matrix times the Kronecker power of
    [[1, 0], [1, 1]].  0/1 integer entries; reduce mod q after multiplying."""
    perm = bit_reversal_perm(n)
    bits = n.bit_length() - 1
    kernel = np.array([[1, 0], [1, 1]], dtype=np.int64)
    g = np.array([[1]], dtype=np.int64)
    for _ in range(bits):
        g = np.kron(kernel, g)
    b = np.zeros((n, n), dtype=np.int64)
    b[np.arange(n), perm] = 1
    return b @ g


def _encode_rows(rows: np.ndarray, q: int) -> np.ndarray:
    """Butterfly transform of each row of a (batch, n) array, in place."""
    n = rows.shape[1]
    size = n
    while size > 1:
        half = size // 2
        view = rows.reshape(rows.shape[0], -1, size)
        view[:, :, :half] = (view[:, :, :half] + view[:, :, half:]) % q
        size = half
    return rows


def polar_encode(u, q: int) -> np.ndarray:
    """Codeword for message vector u: bit-reversal then butterfly."""
    u = np.asarray(u, dtype=np.int64)
    if u.ndim != 1:
        raise ValidationError("message must be one-dimensional")
    n = u.shape[0]
    perm = bit_reversal_perm(n)
    if ((u < 0) | (u >= q)).any():
        raise ValidationError(f"message symbols must lie in [0, {q - 1}]")
    return _encode_rows(u[perm][None, :].copy(), q)[0]


def polar_encode_inverse(x, q: int) -> np.ndarray:
    """Recover the message from a codeword (inverse butterfly, then the
    bit-reversal, which is an involution)."""
    x = np.asarray(x, dtype=np.int64)
    n = x.shape[0]
    perm = bit_reversal_perm(n)
    rows = x[None, :].copy()
    size = 2
    while size <= n:
        half = size // 2
        view = rows.reshape(1, -1, size)
        view[:, :, :half] = (view[:, :, :half] - view[:, :, half:]) % q
        size *= 2
    return rows[0][perm]


def _encode_batch(u: np.ndarray, q: int, perm: np.ndarray) -> np.ndarray:
    return _encode_rows(u[:, perm].copy(), q)


# ---------------------------------------------------------------------------
# successive-cancellation engine over a finite abelian group
# ---------------------------------------------------------------------------

def group_add_table(q: int, pair: bool) -> np.ndarray:
    """Addition table of F_q (pair=False) or F_q x F_q with componentwise
    addition (pair=True, symbols flattened as u*q + v)."""
    a = np.arange(q)
    mod = (a[:, None] + a[None, :]) % q
    if not pair:
        return mod
    u = np.arange(q * q) // q
    v = np.arange(q * q) % q
    return mod[u[:, None], u[None, :]] * q + mod[v[:, None], v[None, :]]


class _SCEngine:
    """One batched SC sweep.

    leaf_likes: (batch, n, m) likelihood vectors, one per codeword position.
    Call posterior(i) then commit(i, symbols) for i = 0..n-1 in order.
    """

    def __init__(self, add_table: np.ndarray, leaf_likes: np.ndarray):
        self.add = add_table
        self.batch, self.n, self.m = leaf_likes.shape
        self.levels = self.n.bit_length() - 1
        self._lik = [np.zeros((self.batch, 1 << (self.levels - k), self.m))
                     for k in range(self.levels + 1)]
        self._lik[0][:, :, :] = leaf_likes
        self._prev = [np.zeros((self.batch, 1 << (self.levels - k)), dtype=np.int64)
                      for k in range(self.levels + 1)]
        self.codeword = np.zeros((self.batch, self.n), dtype=np.int64)
        self._rows = np.arange(self.batch)

    def posterior(self, i: int) -> np.ndarray:
        """Normalized posterior of symbol i given committed prefix."""
        like = self._node_lik(self.levels, 0, i)
        out = np.array(like, dtype=np.float64)
        s = out.sum(axis=1, keepdims=True)
        dead = (s <= 0.0)[:, 0]
        np.divide(out, s, out=out, where=s > 0.0)
        # an impossible prefix (possible only after a decoding error on a
        # deterministic channel) leaves a uniform posterior
        out[dead] = 1.0 / self.m
        return out

    def commit(self, i: int, symbols: np.ndarray) -> None:
        self._commit(self.levels, 0, i, np.asarray(symbols, dtype=np.int64))

    def _node_lik(self, k: int, b: int, i: int) -> np.ndarray:
        if k == 0:
            return self._lik[0][:, b]
        ci = i >> 1
        if (i & 1) == 0:
            la = self._node_lik(k - 1, 2 * b, ci)
            lb = self._node_lik(k - 1, 2 * b + 1, ci)
            self._lik[k - 1][:, 2 * b] = la
            self._lik[k - 1][:, 2 * b + 1] = lb
            out = np.einsum("tij,tj->ti", la[:, self.add], lb)
        else:
            la = self._lik[k - 1][:, 2 * b]
            lb = self._lik[k - 1][:, 2 * b + 1]
            committed = self._prev[k][:, b]
            out = la[self._rows[:, None], self.add[committed]] * lb
        s = out.sum(axis=1, keepdims=True)
        np.divide(out, s, out=out, where=s > 0.0)
        out[(s <= 0.0)[:, 0]] = 1.0 / self.m
        return out

    def _commit(self, k: int, b: int, i: int, symbols: np.ndarray) -> None:
        if k == 0:
            self.codeword[:, b] = symbols
            return
        if (i & 1) == 0:
            self._prev[k][:, b] = symbols
        else:
            first = self._prev[k][:, b]
            self._commit(k - 1, 2 * b, i >> 1, self.add[first, symbols])
            self._commit(k - 1, 2 * b + 1, i >> 1, symbols)


# ---------------------------------------------------------------------------
# code specifications
# ---------------------------------------------------------------------------

# membership codes per index
BOTH_INFO = 0
U_FROZEN = 1
V_FROZEN = 2
BOTH_FROZEN = 3


@dataclass
class CodeSpec:
    """A constructed two-user code.

    a_u / a_v hold 1-based information indices; frozen_u / frozen_v map the
    complementary indices to their fixed symbols (shared with the decoder).
    reliability[i-1] is the per-index decision-error term entering the
    union bound: exact when built from an exact polarization report,
    a genie Monte Carlo estimate otherwise.
    """

    q: int
    n: int
    a_u: tuple
    a_v: tuple
    frozen_u: dict
    frozen_v: dict
    lam: float
    epsilon: float
    seed: int
    mode: str
    pe_threshold: float | None
    reliability: tuple

    def __post_init__(self):
        full = set(range(1, self.n + 1))
        if not set(self.a_u) <= full or not set(self.a_v) <= full:
            raise ValidationError("information indices must lie in [1, n]")
        if set(self.frozen_u) != full - set(self.a_u):
            raise ValidationError("frozen_u must cover exactly the complement of a_u")
        if set(self.frozen_v) != full - set(self.a_v):
            raise ValidationError("frozen_v must cover exactly the complement of a_v")
        if len(self.reliability) != self.n:
            raise ValidationError("reliability must have one entry per index")

    @property
    def rate_u(self) -> float:
        return len(self.a_u) / self.n

    @property
    def rate_v(self) -> float:
        return len(self.a_v) / self.n

    @property
    def sum_rate(self) -> float:
        return (len(self.a_u) + len(self.a_v)) / self.n

    def union_bound(self) -> float:
        return float(sum(self.reliability))

    def membership(self) -> np.ndarray:
        codes = np.zeros(self.n, dtype=np.int64)
        a_u, a_v = set(self.a_u), set(self.a_v)
        for i in range(1, self.n + 1):
            u_info = i in a_u
            v_info = i in a_v
            codes[i - 1] = (BOTH_INFO if u_info and v_info else
                            U_FROZEN if not u_info and v_info else
                            V_FROZEN if u_info and not v_info else
                            BOTH_FROZEN)
        return codes

    def frozen_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        fu = np.zeros(self.n, dtype=np.int64)
        fv = np.zeros(self.n, dtype=np.int64)
        for i, val in self.frozen_u.items():
            fu[i - 1] = val
        for i, val in self.frozen_v.items():
            fv[i - 1] = val
        return fu, fv

    def to_dict(self) -> dict:
        return {
            "q": self.q, "n": self.n,
            "a_u": list(self.a_u), "a_v": list(self.a_v),
            "frozen_u": {str(i): int(v) for i, v in sorted(self.frozen_u.items())},
            "frozen_v": {str(i): int(v) for i, v in sorted(self.frozen_v.items())},
            "lambda": self.lam, "epsilon": self.epsilon,
            "seed": self.seed, "mode": self.mode,
            "pe_threshold": self.pe_threshold,
            "reliability": [float(r) for r in self.reliability],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CodeSpec":
        try:
            return cls(
                q=int(data["q"]), n=int(data["n"]),
                a_u=tuple(int(i) for i in data["a_u"]),
                a_v=tuple(int(i) for i in data["a_v"]),
                frozen_u={int(i): int(v) for i, v in data["frozen_u"].items()},
                frozen_v={int(i): int(v) for i, v in data["frozen_v"].items()},
                lam=float(data["lambda"]), epsilon=float(data["epsilon"]),
                seed=int(data["seed"]), mode=str(data["mode"]),
                pe_threshold=(None if data.get("pe_threshold") is None
                              else float(data["pe_threshold"])),
                reliability=tuple(float(r) for r in data["reliability"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed code spec: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CodeSpec":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"code spec {path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data)


@dataclass
class PointCodeSpec:
    """A constructed single-user code (corner-point scheme component)."""

    q: int
    n: int
    a: tuple
    frozen: dict
    z_threshold: float
    seed: int
    mode: str
    reliability: tuple
    z_values: tuple

    def __post_init__(self):
        full = set(range(1, self.n + 1))
        if not set(self.a) <= full:
            raise ValidationError("information indices must lie in [1, n]")
        if set(self.frozen) != full - set(self.a):
            raise ValidationError("frozen must cover exactly the complement of a")

    @property
    def rate(self) -> float:
        return len(self.a) / self.n

    def union_bound(self) -> float:
        return float(sum(self.reliability[i - 1] for i in self.a))

    def frozen_array(self) -> np.ndarray:
        arr = np.zeros(self.n, dtype=np.int64)
        for i, val in self.frozen.items():
            arr[i - 1] = val
        return arr

    def info_mask(self) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for i in self.a:
            mask[i - 1] = True
        return mask

    def to_dict(self) -> dict:
        return {
            "q": self.q, "n": self.n, "a": list(self.a),
            "frozen": {str(i): int(v) for i, v in sorted(self.frozen.items())},
            "z_threshold": self.z_threshold, "seed": self.seed,
            "mode": self.mode,
            "reliability": [float(r) for r in self.reliability],
            "z_values": [float(z) for z in self.z_values],
        }


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def construct(mac: Mac, report, epsilon: float, lam: float, *,
              seed: int = 0, pe_threshold: float = 1e-3) -> CodeSpec:
    """Select information sets from a polarization report.

    With an exact report, each index is assigned by the class of its rate
    triple within the epsilon ball: useless and unpolarized indices are
    frozen for both users, one-sided-perfect indices carry that user's
    symbol, full-rate indices carry both, and contention indices are split
    deterministically: the first ceil(lam * m) of them (ascending index
    order) carry user 1, the rest user 2.

    With a Monte Carlo report, ball membership is replaced by thresholding
    the genie error estimates at pe_threshold, with the same contention
    split.  Frozen symbols are drawn from the seeded stream and stored.
    """
    if not (0.0 <= lam <= 1.0):
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    if not (0.0 < epsilon < 0.5):
        raise ValidationError(f"epsilon must lie in (0, 0.5), got {epsilon}")
    if mac.q != report.q:
        raise ValidationError(
            f"channel q={mac.q} does not match report q={report.q}")
    n = 2 ** report.depth
    entries = report.entries
    if len(entries) != n:
        raise ValidationError("report entry count does not match its depth")

    memberships = [BOTH_FROZEN] * n
    contention: list[int] = []
    for pos, entry in enumerate(entries):
        if report.mode == "exact":
            kind = entry.nearest_kind if entry.distance < epsilon else "unpolarized"
            if kind == "t112":
                memberships[pos] = BOTH_INFO
            elif kind == "t101":
                memberships[pos] = V_FROZEN
            elif kind == "t011":
                memberships[pos] = U_FROZEN
            elif kind == "t111":
                contention.append(pos)
        else:
            u_alone = entry.pe_u <= pe_threshold
            v_alone = entry.pe_v <= pe_threshold
            if u_alone and v_alone:
                memberships[pos] = BOTH_INFO
            elif u_alone:
                memberships[pos] = V_FROZEN
            elif v_alone:
                memberships[pos] = U_FROZEN
            elif (entry.pe_u_given_v <= pe_threshold
                  and entry.pe_v_given_u <= pe_threshold):
                contention.append(pos)

    take_u = math.ceil(lam * len(contention))
    for rank, pos in enumerate(contention):
        memberships[pos] = V_FROZEN if rank < take_u else U_FROZEN

    rng = _rng_for(seed, PURPOSE_FROZEN)
    a_u, a_v = [], []
    frozen_u, frozen_v = {}, {}
    for pos in range(n):
        idx = pos + 1
        code = memberships[pos]
        if code in (BOTH_INFO, V_FROZEN):
            a_u.append(idx)
        else:
            frozen_u[idx] = int(rng.integers(mac.q))
        if code in (BOTH_INFO, U_FROZEN):
            a_v.append(idx)
        else:
            frozen_v[idx] = int(rng.integers(mac.q))

    reliability = []
    for pos in range(n):
        idx = pos + 1
        code = memberships[pos]
        entry = entries[pos]
        if code == BOTH_FROZEN:
            reliability.append(0.0)
        elif code == BOTH_INFO:
            reliability.append(float(entry.pe_joint))
        elif code == V_FROZEN:  # u carries information, v frozen
            if report.mode == "exact":
                reliability.append(float(entry.pe_u_slices[frozen_v[idx]]))
            else:
                reliability.append(float(entry.pe_u_given_v))
        else:  # v carries information, u frozen
            if report.mode == "exact":
                reliability.append(float(entry.pe_v_slices[frozen_u[idx]]))
            else:
                reliability.append(float(entry.pe_v_given_u))

    return CodeSpec(q=mac.q, n=n, a_u=tuple(a_u), a_v=tuple(a_v),
                    frozen_u=frozen_u, frozen_v=frozen_v, lam=lam,
                    epsilon=epsilon, seed=seed, mode=report.mode,
                    pe_threshold=(None if report.mode == "exact" else pe_threshold),
                    reliability=tuple(reliability))


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------

def _decide_joint_batch(post: np.ndarray, q: int, code: int,
                        u0: int, v0: int) -> np.ndarray:
    """Per-index joint decision: argmax with lexicographic tie-break,
    conditioning on any frozen coordinate."""
    batch = post.shape[0]
    if code == BOTH_FROZEN:
        return np.full(batch, u0 * q + v0, dtype=np.int64)
    if code == U_FROZEN:
        sub = post.reshape(batch, q, q)[:, u0, :]
        return u0 * q + np.argmax(sub, axis=1)
    if code == V_FROZEN:
        sub = post.reshape(batch, q, q)[:, :, v0]
        return np.argmax(sub, axis=1) * q + v0
    return np.argmax(post, axis=1)


def _joint_leaf_likes(mac: Mac, y: np.ndarray) -> np.ndarray:
    """(batch, n, q*q) leaf likelihoods for received blocks y."""
    q = mac.q
    flat = mac.probs.reshape(q * q, -1)
    return flat[:, y].transpose(1, 2, 0).copy()


def _validate_received(mac: Mac, y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if y.ndim != 1 or y.shape[0] != n:
        raise ValidationError(f"received block must have length {n}")
    if ((y < 0) | (y >= mac.output_count)).any():
        raise ValidationError(
            f"received symbols must lie in [0, {mac.output_count - 1}]")
    return y


def sc_decode_joint(spec: CodeSpec, mac: Mac, y) -> tuple[np.ndarray, np.ndarray]:
    """Joint SC decoding of one received block; returns (u_hat, v_hat)."""
    if mac.q != spec.q:
        raise ValidationError(f"channel q={mac.q} does not match spec q={spec.q}")
    y = _validate_received(mac, y, spec.n)
    codes = spec.membership()
    fu, fv = spec.frozen_arrays()
    engine = _SCEngine(group_add_table(spec.q, pair=True),
                       _joint_leaf_likes(mac, y[None, :]))
    decided = np.zeros(spec.n, dtype=np.int64)
    for i in range(spec.n):
        post = engine.posterior(i)
        g = _decide_joint_batch(post, spec.q, int(codes[i]), int(fu[i]), int(fv[i]))
        engine.commit(i, g)
        decided[i] = g[0]
    return decided // spec.q, decided % spec.q


# ---------------------------------------------------------------------------
# simulation reports
# ---------------------------------------------------------------------------

@dataclass
class SimReport:
    """Monte Carlo block-error results with Wilson 95% intervals."""

    scheme: str
    trials: int
    block_errors: int
    bler: float
    wilson_lo: float
    wilson_hi: float
    union_bound: float | None
    union_bound_mode: str | None
    seed: int
    per_index_errors: tuple = ()
    identity_checked: bool = False
    identity_violations: int = 0

    @property
    def wilson_halfwidth(self) -> float:
        return (self.wilson_hi - self.wilson_lo) / 2.0

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme,
            "trials": self.trials,
            "block_errors": self.block_errors,
            "bler": self.bler,
            "wilson_lo": self.wilson_lo,
            "wilson_hi": self.wilson_hi,
            "union_bound": self.union_bound,
            "union_bound_mode": self.union_bound_mode,
            "seed": self.seed,
            "per_index_errors": list(self.per_index_errors),
            "identity_checked": self.identity_checked,
            "identity_violations": self.identity_violations,
        }

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("trials,block_errors,bler,wilson_lo,wilson_hi,union_bound\n")
            ub = "" if self.union_bound is None else repr(self.union_bound)
            fh.write(f"{self.trials},{self.block_errors},{self.bler!r},"
                     f"{self.wilson_lo!r},{self.wilson_hi!r},{ub}\n")

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=2)
            fh.write("\n")


def _sample_outputs(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Sample one output index per row distribution; rows (..., outputs)."""
    cdf = np.cumsum(rows, axis=-1)
    r = rng.random(rows.shape[:-1] + (1,))
    idx = (r > cdf).sum(axis=-1)
    return np.minimum(idx, rows.shape[-1] - 1)


def _first_mismatch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-row index of the first mismatch, or n when rows agree."""
    diff = a != b
    first = np.where(diff.any(axis=1), diff.argmax(axis=1), a.shape[1])
    return first


def _simulate_chunk(spec: CodeSpec, mac: Mac, chunk_index: int,
                    chunk_size: int, seed: int, instrument: bool) -> tuple:
    rng = _rng_for(seed, PURPOSE_SIMULATE, chunk_index)
    q, n = spec.q, spec.n
    perm = bit_reversal_perm(n)
    codes = spec.membership()
    fu, fv = spec.frozen_arrays()
    info_u = codes == BOTH_INFO
    info_u |= codes == V_FROZEN
    info_v = (codes == BOTH_INFO) | (codes == U_FROZEN)

    u = np.tile(fu, (chunk_size, 1))
    v = np.tile(fv, (chunk_size, 1))
    u[:, info_u] = rng.integers(q, size=(chunk_size, int(info_u.sum())))
    v[:, info_v] = rng.integers(q, size=(chunk_size, int(info_v.sum())))

    x = _encode_batch(u, q, perm)
    w = _encode_batch(v, q, perm)
    y = _sample_outputs(mac.probs[x, w], rng)

    leaves = _joint_leaf_likes(mac, y)
    add = group_add_table(q, pair=True)
    g_true = u * q + v

    engine = _SCEngine(add, leaves)
    decided = np.zeros((chunk_size, n), dtype=np.int64)
    for i in range(n):
        post = engine.posterior(i)
        g = _decide_joint_batch(post, q, int(codes[i]), int(fu[i]), int(fv[i]))
        engine.commit(i, g)
        decided[:, i] = g

    mismatches = decided != g_true
    block_errors = int(mismatches.any(axis=1).sum())
    per_index = mismatches.sum(axis=0).astype(np.int64)

    violations = 0
    if instrument:
        genie = _SCEngine(add, leaves)
        would_be = np.zeros((chunk_size, n), dtype=np.int64)
        for i in range(n):
            post = genie.posterior(i)
            would_be[:, i] = _decide_joint_batch(post, q, int(codes[i]),
                                                 int(fu[i]), int(fv[i]))
            genie.commit(i, g_true[:, i])
        first_genie = _first_mismatch(would_be, g_true)
        first_stand = _first_mismatch(decided, g_true)
        violations = int((first_genie != first_stand).sum())

    return block_errors, per_index, violations


def _run_chunked(worker, jobs: list, workers: int) -> list:
    if workers <= 1:
        return [worker(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_star_apply, [(worker, job) for job in jobs]))


def _star_apply(pair):
    worker, job = pair
    return worker(*job)


def _chunk_sizes(trials: int) -> list[int]:
    sizes = []
    remaining = trials
    while remaining > 0:
        take = min(CHUNK_TRIALS, remaining)
        sizes.append(take)
        remaining -= take
    return sizes


def simulate_block(spec: CodeSpec, mac: Mac, trials: int, seed: int, *,
                   workers: int = 1, instrument: bool = True) -> SimReport:
    """Monte Carlo block-error simulation of the joint SC scheme.

    Draws uniform information symbols, encodes both users, passes the
    codewords through the channel, decodes, and reports the block error
    rate with its Wilson interval plus the union bound accumulated at
    construction time.  When instrument is set, every trial also runs the
    genie-aided decoder and checks that the first genie error index equals
    the first standalone error index.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if mac.q != spec.q:
        raise ValidationError(f"channel q={mac.q} does not match spec q={spec.q}")
    jobs = [(spec, mac, ci, size, seed, instrument)
            for ci, size in enumerate(_chunk_sizes(trials))]
    results = _run_chunked(_simulate_chunk, jobs, workers)
    block_errors = sum(r[0] for r in results)
    per_index = np.zeros(spec.n, dtype=np.int64)
    for r in results:
        per_index += r[1]
    violations = sum(r[2] for r in results)
    lo, hi = wilson_interval(block_errors, trials)
    return SimReport(scheme="joint", trials=trials, block_errors=block_errors,
                     bler=block_errors / trials, wilson_lo=lo, wilson_hi=hi,
                     union_bound=spec.union_bound(),
                     union_bound_mode=spec.mode, seed=seed,
                     per_index_errors=tuple(int(c) for c in per_index),
                     identity_checked=instrument,
                     identity_violations=violations)


# ---------------------------------------------------------------------------
# genie-aided Monte Carlo statistics (used by the polarizer and the
# corner-point construction)
# ---------------------------------------------------------------------------

def _z_statistic(probs: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-row unbiased Bhattacharyya statistic: the mean over trials of
    sum_{x' != x} sqrt(p(x')/p(x)) / (k-1) estimates Z of the decision
    channel.  probs (batch, k) need not be normalized."""
    s = np.sqrt(probs)
    rows = np.arange(probs.shape[0])
    denom = np.maximum(s[rows, truth], 1e-300)
    return (s.sum(axis=1) - s[rows, truth]) / denom / (probs.shape[1] - 1)


def _genie_joint_chunk(mac: Mac, depth: int, chunk_index: int,
                       chunk_size: int, seed: int) -> dict:
    rng = _rng_for(seed, PURPOSE_GENIE, chunk_index)
    q = mac.q
    n = 2 ** depth
    perm = bit_reversal_perm(n)
    u = rng.integers(q, size=(chunk_size, n))
    v = rng.integers(q, size=(chunk_size, n))
    x = _encode_batch(u, q, perm)
    w = _encode_batch(v, q, perm)
    y = _sample_outputs(mac.probs[x, w], rng)

    engine = _SCEngine(group_add_table(q, pair=True), _joint_leaf_likes(mac, y))
    g_true = u * q + v
    rows = np.arange(chunk_size)
    err = np.zeros((n, 5), dtype=np.int64)   # joint, u, v, u|v, v|u
    zsum = np.zeros((n, 4), dtype=np.float64)  # u, v, u|v, v|u
    for i in range(n):
        post = engine.posterior(i)
        engine.commit(i, g_true[:, i])
        cube = post.reshape(chunk_size, q, q)
        ut, vt = u[:, i], v[:, i]
        marg_u = cube.sum(axis=2)
        marg_v = cube.sum(axis=1)
        cond_u = cube[rows, :, vt]
        cond_v = cube[rows, ut, :]
        err[i, 0] = (np.argmax(post, axis=1) != g_true[:, i]).sum()
        err[i, 1] = (np.argmax(marg_u, axis=1) != ut).sum()
        err[i, 2] = (np.argmax(marg_v, axis=1) != vt).sum()
        err[i, 3] = (np.argmax(cond_u, axis=1) != ut).sum()
        err[i, 4] = (np.argmax(cond_v, axis=1) != vt).sum()
        zsum[i, 0] = _z_statistic(marg_u, ut).sum()
        zsum[i, 1] = _z_statistic(marg_v, vt).sum()
        zsum[i, 2] = _z_statistic(cond_u, ut).sum()
        zsum[i, 3] = _z_statistic(cond_v, vt).sum()
    return {"err": err, "zsum": zsum}


def genie_joint_stats(mac: Mac, depth: int, trials: int, seed: int, *,
                      workers: int = 1) -> dict:
    """Per-index genie-aided error counts and Bhattacharyya statistics for
    all n = 2**depth synthesized channels, from `trials` random blocks."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    jobs = [(mac, depth, ci, size, seed)
            for ci, size in enumerate(_chunk_sizes(trials))]
    results = _run_chunked(_genie_joint_chunk, jobs, workers)
    err = sum((r["err"] for r in results), np.zeros_like(results[0]["err"]))
    zsum = sum((r["zsum"] for r in results), np.zeros_like(results[0]["zsum"]))
    return {"trials": trials, "err": err, "zsum": zsum}


def _genie_point_chunk(chan: PointChannel, depth: int, chunk_index: int,
                       chunk_size: int, seed: int, purpose: int) -> dict:
    rng = _rng_for(seed, purpose, chunk_index)
    q = chan.q
    n = 2 ** depth
    perm = bit_reversal_perm(n)
    u = rng.integers(q, size=(chunk_size, n))
    x = _encode_batch(u, q, perm)
    y = _sample_outputs(chan.probs[x], rng)
    leaves = chan.probs[:, y].transpose(1, 2, 0).copy()
    engine = _SCEngine(group_add_table(q, pair=False), leaves)
    err = np.zeros(n, dtype=np.int64)
    zsum = np.zeros(n, dtype=np.float64)
    for i in range(n):
        post = engine.posterior(i)
        engine.commit(i, u[:, i])
        err[i] = (np.argmax(post, axis=1) != u[:, i]).sum()
        zsum[i] = _z_statistic(post, u[:, i]).sum()
    return {"err": err, "zsum": zsum}


def genie_point_stats(chan: PointChannel, depth: int, trials: int, seed: int,
                      *, purpose: int = PURPOSE_GENIE_POINT_1,
                      workers: int = 1) -> dict:
    """Single-user genie statistics for all synthesized indices."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    jobs = [(chan, depth, ci, size, seed, purpose)
            for ci, size in enumerate(_chunk_sizes(trials))]
    results = _run_chunked(_genie_point_chunk, jobs, workers)
    err = sum((r["err"] for r in results), np.zeros_like(results[0]["err"]))
    zsum = sum((r["zsum"] for r in results), np.zeros_like(results[0]["zsum"]))
    return {"trials": trials, "err": err, "zsum": zsum}


# ---------------------------------------------------------------------------
# corner-point scheme
# ---------------------------------------------------------------------------

def _point_code(chan: PointChannel, depth: int, z_threshold: float,
                mode: str, trials: int, seed: int, frozen_purpose: int,
                genie_purpose: int, cap: int, workers: int) -> PointCodeSpec:
    n = 2 ** depth
    used_mode = mode
    if mode == "auto":
        used_mode = "exact"
    if used_mode == "exact":
        try:
            level = [chan]
            for _ in range(depth):
                nxt = []
                for node in level:
                    nxt.append(point_b(node, cap=cap))
                    nxt.append(point_g(node, cap=cap))
                level = nxt
            z_values = [bhattacharyya(leaf) for leaf in level]
            pe_values = [ml_error_prob(leaf) for leaf in level]
        except AlphabetCapError:
            if mode != "auto":
                raise
            used_mode = "mc"
    if used_mode == "mc":
        stats = genie_point_stats(chan, depth, trials, seed,
                                  purpose=genie_purpose, workers=workers)
        z_values = list(stats["zsum"] / stats["trials"])
        pe_values = list(stats["err"] / stats["trials"])

    a = tuple(i + 1 for i in range(n) if z_values[i] <= z_threshold)
    rng = _rng_for(seed, frozen_purpose)
    frozen = {}
    info = set(a)
    for i in range(1, n + 1):
        if i not in info:
            frozen[i] = int(rng.integers(chan.q))
    return PointCodeSpec(q=chan.q, n=n, a=a, frozen=frozen,
                         z_threshold=z_threshold, seed=seed, mode=used_mode,
                         reliability=tuple(float(p) for p in pe_values),
                         z_values=tuple(float(z) for z in z_values))


def corner_construct(mac: Mac, depth: int, z_threshold: float, *,
                     mode: str = "auto", trials: int = 10000, seed: int = 0,
                     cap: int = DEFAULT_ALPHABET_CAP,
                     workers: int = 1) -> tuple[PointCodeSpec, PointCodeSpec]:
    """Two single-user codes for successive decoding at a rate-region
    corner: code 1 sees user 1's channel with the other input averaged
    out, code 2 sees user 2's channel with user 1's input revealed.

    Information sets take every index whose Bhattacharyya figure is at or
    below z_threshold.  mode "exact" synthesizes the index channels and
    uses exact Z; "mc" estimates them by single-user genie decoding with
    `trials` blocks; "auto" tries exact and falls back to mc when the
    alphabet budget is exceeded.
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    if mode not in ("auto", "exact", "mc"):
        raise ValidationError(f"unknown construction mode {mode!r}")
    chan1 = marginal_channel(mac, "U")
    chan2 = marginal_channel(mac, "V|U")
    spec1 = _point_code(chan1, depth, z_threshold, mode, trials, seed,
                        PURPOSE_CORNER_FROZEN_1, PURPOSE_GENIE_POINT_1,
                        cap, workers)
    spec2 = _point_code(chan2, depth, z_threshold, mode, trials, seed,
                        PURPOSE_CORNER_FROZEN_2, PURPOSE_GENIE_POINT_2,
                        cap, workers)
    return spec1, spec2


def _decode_point_batch(engine: _SCEngine, n: int, info_mask: np.ndarray,
                        frozen: np.ndarray) -> np.ndarray:
    batch = engine.batch
    decided = np.zeros((batch, n), dtype=np.int64)
    for i in range(n):
        post = engine.posterior(i)
        if info_mask[i]:
            g = np.argmax(post, axis=1)
        else:
            g = np.full(batch, frozen[i], dtype=np.int64)
        engine.commit(i, g)
        decided[:, i] = g
    return decided


def corner_decode(spec1: PointCodeSpec, spec2: PointCodeSpec, mac: Mac, y, *,
                  x_override=None) -> tuple[np.ndarray, np.ndarray]:
    """Successive decoding: estimate user 1's block from y alone, re-encode
    it, then decode user 2 conditioned on that hard estimate.

    x_override substitutes a forced codeword for user 1 (diagnostic hook;
    the second stage always assumes the first decision is correct).
    Returns the two decoded message vectors (u-domain, full length).
    """
    y = _validate_received(mac, y, spec1.n)
    q = mac.q
    add = group_add_table(q, pair=False)
    chan1 = marginal_channel(mac, "U")
    if x_override is None:
        leaves1 = chan1.probs[:, y].T[None, :, :].copy()
        engine1 = _SCEngine(add, leaves1)
        u1 = _decode_point_batch(engine1, spec1.n, spec1.info_mask(),
                                 spec1.frozen_array())[0]
        x_hat = engine1.codeword[0]
    else:
        x_hat = np.asarray(x_override, dtype=np.int64)
        if x_hat.shape != (spec1.n,):
            raise ValidationError("x_override must be a full codeword")
        u1 = polar_encode_inverse(x_hat, q)
    # stage 2 sees (y_j, x_hat_j): likelihood over w is P(y_j | x_hat_j, w)
    leaves2 = mac.probs[x_hat, :, y][None, :, :].copy()
    engine2 = _SCEngine(add, leaves2)
    u2 = _decode_point_batch(engine2, spec2.n, spec2.info_mask(),
                             spec2.frozen_array())[0]
    return u1, u2


def _corner_chunk(spec1: PointCodeSpec, spec2: PointCodeSpec, mac: Mac,
                  chunk_index: int, chunk_size: int, seed: int) -> tuple:
    rng = _rng_for(seed, PURPOSE_CORNER_SIMULATE, chunk_index)
    q = mac.q
    n = spec1.n
    perm = bit_reversal_perm(n)
    info1, info2 = spec1.info_mask(), spec2.info_mask()
    u1 = np.tile(spec1.frozen_array(), (chunk_size, 1))
    u2 = np.tile(spec2.frozen_array(), (chunk_size, 1))
    u1[:, info1] = rng.integers(q, size=(chunk_size, int(info1.sum())))
    u2[:, info2] = rng.integers(q, size=(chunk_size, int(info2.sum())))
    x = _encode_batch(u1, q, perm)
    w = _encode_batch(u2, q, perm)
    y = _sample_outputs(mac.probs[x, w], rng)

    add = group_add_table(q, pair=False)
    chan1 = marginal_channel(mac, "U")
    leaves1 = chan1.probs[:, y].transpose(1, 2, 0).copy()
    engine1 = _SCEngine(add, leaves1)
    d1 = _decode_point_batch(engine1, n, info1, spec1.frozen_array())
    x_hat = engine1.codeword.copy()

    leaves2 = mac.probs[x_hat, :, y].copy()
    engine2 = _SCEngine(add, leaves2)
    d2 = _decode_point_batch(engine2, n, info2, spec2.frozen_array())

    errors = ((d1 != u1).any(axis=1) | (d2 != u2).any(axis=1))
    return (int(errors.sum()),)


def simulate_corner(spec1: PointCodeSpec, spec2: PointCodeSpec, mac: Mac,
                    trials: int, seed: int, *, workers: int = 1) -> SimReport:
    """Block-error simulation of the corner-point successive decoder."""
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if spec1.n != spec2.n:
        raise ValidationError("component codes must share a block length")
    jobs = [(spec1, spec2, mac, ci, size, seed)
            for ci, size in enumerate(_chunk_sizes(trials))]
    results = _run_chunked(_corner_chunk, jobs, workers)
    block_errors = sum(r[0] for r in results)
    lo, hi = wilson_interval(block_errors, trials)
    mode = "exact" if spec1.mode == spec2.mode == "exact" else "mc"
    return SimReport(scheme="corner", trials=trials, block_errors=block_errors,
                     bler=block_errors / trials, wilson_lo=lo, wilson_hi=hi,
                     union_bound=spec1.union_bound() + spec2.union_bound(),
                     union_bound_mode=mode, seed=seed)
