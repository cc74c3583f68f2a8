"""Arithmetic in the prime field F_q = {0, ..., q-1}.

Elements are plain small integers, reduced eagerly; every public
function validates its operands.  All functions are pure and safe for
concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ValidationError


def is_prime(n: int) -> bool:
    """Trial-division primality test; q stays small so this is cheap."""
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


@dataclass(frozen=True)
class FieldSpec:
    """The prime modulus q; rejects composite or undersized values."""

    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or isinstance(self.q, bool):
            raise ValidationError(f"field modulus must be an int, got {self.q!r}")
        if not is_prime(self.q):
            raise ValidationError(f"field modulus must be prime, got q={self.q}")

    def check_element(self, a: int, name: str = "element") -> int:
        if not isinstance(a, (int,)) or isinstance(a, bool):
            a = int(a)
        if a < 0 or a >= self.q:
            raise ValidationError(f"{name}={a} out of range [0, {self.q - 1}]")
        return a


def fq_add(a: int, b: int, field: FieldSpec) -> int:
    """(a + b) mod q."""
    a = field.check_element(a, "a")
    b = field.check_element(b, "b")
    return (a + b) % field.q


def fq_sub(a: int, b: int, field: FieldSpec) -> int:
    """(a - b) mod q, the inverse of fq_add."""
    a = field.check_element(a, "a")
    b = field.check_element(b, "b")
    return (a - b) % field.q


def fq_neg(a: int, field: FieldSpec) -> int:
    """Additive inverse."""
    a = field.check_element(a, "a")
    return (-a) % field.q


def fq_mul(a: int, b: int, field: FieldSpec) -> int:
    """(a * b) mod q."""
    a = field.check_element(a, "a")
    b = field.check_element(b, "b")
    return (a * b) % field.q


def fq_mul_inv(a: int, field: FieldSpec) -> int:
    """Multiplicative inverse of a nonzero element."""
    a = field.check_element(a, "a")
    if a == 0:
        raise ValidationError("0 has no multiplicative inverse")
    return pow(a, field.q - 2, field.q)
