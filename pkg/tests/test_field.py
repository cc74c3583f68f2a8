import pytest

from macpolar import FieldSpec, ValidationError, fq_add, fq_mul, fq_mul_inv, fq_neg, fq_sub


def test_add_examples():
    assert fq_add(0, 0, FieldSpec(2)) == 0
    assert fq_add(1, 1, FieldSpec(2)) == 0
    assert fq_add(2, 2, FieldSpec(3)) == 1


def test_sub_is_inverse_of_add():
    for q in (2, 3, 5, 7):
        f = FieldSpec(q)
        for a in range(q):
            for b in range(q):
                assert fq_sub(fq_add(a, b, f), b, f) == a


def test_neg_cancels():
    for q in (2, 3, 5):
        f = FieldSpec(q)
        for a in range(q):
            assert fq_add(a, fq_neg(a, f), f) == 0


def test_inverse_examples():
    assert fq_mul_inv(1, FieldSpec(2)) == 1
    assert fq_mul_inv(2, FieldSpec(3)) == 2
    assert fq_mul_inv(3, FieldSpec(5)) == 2


def test_inverse_is_bijection_and_self_inverse_set():
    for q in (2, 3, 5, 7):
        f = FieldSpec(q)
        images = {fq_mul_inv(a, f) for a in range(1, q)}
        assert images == set(range(1, q))
        for a in range(1, q):
            assert fq_mul(a, fq_mul_inv(a, f), f) == 1
            if fq_mul(a, a, f) == 1:
                assert fq_mul_inv(a, f) == a


def test_field_axioms_exhaustive():
    for q in (2, 3, 5, 7):
        f = FieldSpec(q)
        elems = range(q)
        for a in elems:
            for b in elems:
                assert fq_add(a, b, f) == fq_add(b, a, f)
                assert fq_mul(a, b, f) == fq_mul(b, a, f)
                for c in elems:
                    assert fq_add(fq_add(a, b, f), c, f) == fq_add(a, fq_add(b, c, f), f)
                    assert fq_mul(fq_mul(a, b, f), c, f) == fq_mul(a, fq_mul(b, c, f), f)
                    assert fq_mul(a, fq_add(b, c, f), f) == fq_add(
                        fq_mul(a, b, f), fq_mul(a, c, f), f)


def test_rejects_composite_and_bad_elements():
    with pytest.raises(ValidationError):
        FieldSpec(4)
    with pytest.raises(ValidationError):
        FieldSpec(1)
    with pytest.raises(ValidationError):
        FieldSpec(-3)
    f = FieldSpec(3)
    with pytest.raises(ValidationError):
        fq_add(3, 0, f)
    with pytest.raises(ValidationError):
        fq_add(0, -1, f)
    with pytest.raises(ValidationError):
        fq_mul_inv(0, f)
