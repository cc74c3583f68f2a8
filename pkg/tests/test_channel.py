import json

import numpy as np
import pytest

from macpolar import (Mac, ValidationError, bhattacharyya, build_adder_mac,
                      build_extremal_mac, canonicalize, info_triple, load_mac,
                      mac_from_dict, mac_from_table, mac_to_dict, ml_error_prob,
                      point_info, save_mac)
from macpolar.channel import PointChannel

from conftest import mac_ensemble, point_ensemble


def test_identity_mac_accepted():
    probs = np.zeros((4, 4))
    for x in range(2):
        for w in range(2):
            probs[2 * x + w, 2 * x + w] = 1.0
    mac = mac_from_table(2, probs)
    assert mac.output_count == 4


def test_bad_row_sum_names_row():
    probs = np.full((4, 2), 0.5)
    probs[2] = [0.25, 0.25]
    with pytest.raises(ValidationError, match="row 2"):
        mac_from_table(2, probs)


def test_negative_entry_rejected():
    probs = np.full((4, 2), 0.5)
    probs[1] = [1.5, -0.5]
    with pytest.raises(ValidationError, match="negative"):
        mac_from_table(2, probs)


def test_composite_q_rejected():
    probs = np.full((16, 2), 0.5)
    with pytest.raises(ValidationError, match="prime"):
        mac_from_table(4, probs)


def test_adder_q2_table():
    mac = build_adder_mac(2, 0.0)
    assert mac.output_count == 3
    assert mac.probs[0, 1, 1] == 1.0
    assert mac.probs[1, 0, 1] == 1.0
    assert mac.probs[0, 0, 0] == 1.0
    assert mac.probs[1, 1, 2] == 1.0


def test_adder_triple():
    # H(Y) of (1/4, 1/2, 1/4) is 1.5 bits; both conditional rates are 1
    t = info_triple(build_adder_mac(2, 0.0))
    assert t.as_array() == pytest.approx([1.0, 1.0, 1.5], abs=1e-12)


def test_adder_q3_one_hot():
    mac = build_adder_mac(3, 0.0)
    assert mac.output_count == 5
    for x in range(3):
        for w in range(3):
            row = mac.probs[x, w]
            assert row.sum() == 1.0
            assert row[x + w] == 1.0


@pytest.mark.parametrize("q", [2, 3, 5])
def test_adder_reachable_outputs(q):
    mac = build_adder_mac(q, 0.0)
    reachable = (mac.probs.reshape(q * q, -1).sum(axis=0) > 0).sum()
    assert reachable == 2 * q - 1


def test_adder_flip_prob_rows():
    mac = build_adder_mac(2, 0.3)
    assert mac.probs[0, 0] == pytest.approx([0.7, 0.15, 0.15])
    with pytest.raises(ValidationError):
        build_adder_mac(2, 1.0)


EXPECTED_TRIPLES = {
    "useless": (0.0, 0.0, 0.0),
    "user1-perfect": (1.0, 0.0, 1.0),
    "user2-perfect": (0.0, 1.0, 1.0),
    "contention": (1.0, 1.0, 1.0),
    "perfect": (1.0, 1.0, 2.0),
}


@pytest.mark.parametrize("kind,expected", sorted(EXPECTED_TRIPLES.items()))
def test_extremal_builders_hit_their_points(kind, expected):
    t = info_triple(build_extremal_mac(kind))
    assert t.as_array() == pytest.approx(expected, abs=1e-12)


def test_extremal_unknown_kind():
    with pytest.raises(ValidationError):
        build_extremal_mac("nonsense")


def test_canonicalize_merges_proportional_columns():
    # two outputs with identical posteriors collapse into one
    probs = np.array([[0.2, 0.3, 0.5],
                      [0.4, 0.6, 0.0]])
    chan = PointChannel(q=2, probs=probs)
    canon = canonicalize(chan)
    assert canon.output_count == 2
    merged = canon.probs
    col_sums = sorted(merged.sum(axis=0))
    assert col_sums == pytest.approx([0.5, 1.5])


def test_canonicalize_drops_zero_mass_outputs():
    probs = np.array([[0.5, 0.0, 0.5],
                      [0.5, 0.0, 0.5]])
    canon = canonicalize(PointChannel(q=2, probs=probs))
    assert canon.output_count == 1


def test_canonicalize_idempotent(macs50):
    for mac in macs50[:12]:
        once = canonicalize(mac)
        twice = canonicalize(once)
        assert once.output_count == twice.output_count
        assert np.array_equal(once.probs, twice.probs)


def test_canonicalize_preserves_mac_triple(macs50):
    for mac in macs50[:12]:
        before = info_triple(mac).as_array()
        after = info_triple(canonicalize(mac)).as_array()
        assert np.abs(before - after).max() < 1e-9


def test_canonicalize_preserves_point_functionals(points50):
    for chan in points50[:12]:
        canon = canonicalize(chan)
        assert abs(point_info(chan) - point_info(canon)) < 1e-9
        assert abs(bhattacharyya(chan) - bhattacharyya(canon)) < 1e-9
        assert abs(ml_error_prob(chan) - ml_error_prob(canon)) < 1e-9


def test_canonicalize_invariant_under_output_permutation(macs50):
    rng = np.random.default_rng(5)
    for mac in macs50[:8]:
        perm = rng.permutation(mac.output_count)
        shuffled = Mac(q=mac.q, probs=mac.probs[:, :, perm])
        a = canonicalize(mac)
        b = canonicalize(shuffled)
        assert a.output_count == b.output_count
        assert np.abs(a.probs - b.probs).max() < 1e-12


def test_json_round_trip(tmp_path):
    mac = build_adder_mac(3, 0.1)
    path = tmp_path / "chan.json"
    save_mac(mac, path)
    loaded = load_mac(path)
    assert loaded.q == 3
    assert np.abs(loaded.probs - mac.probs).max() < 1e-15


def test_json_row_order_is_x_major(tmp_path):
    # lexicographic (x, w) order: row index 1 must be (x=0, w=1)
    probs = np.zeros((2, 2, 4))
    for x in range(2):
        for w in range(2):
            probs[x, w, 2 * x + w] = 1.0
    data = mac_to_dict(Mac(q=2, probs=probs))
    assert data["probs"][1] == [0.0, 1.0, 0.0, 0.0]
    rebuilt = mac_from_dict(data)
    assert np.array_equal(rebuilt.probs, probs)


def test_load_rejects_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"q": 2, "outputs": 3, "probs": [[1.0, 0.0]]}))
    with pytest.raises(ValidationError):
        load_mac(path)
    path.write_text("not json")
    with pytest.raises(ValidationError):
        load_mac(path)
