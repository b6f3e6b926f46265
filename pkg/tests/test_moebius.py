import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brennan.errors import NotDiskPreserving, PoleAtOrigin
from brennan.moebius import (
    ETA,
    IDENTITY,
    INF,
    DiskAutomorphism,
    MoebiusMap,
    MoebiusType,
    apply,
    cayley,
    classify,
    commutator,
    compose,
    deriv_at,
    deriv_at_zero,
    from_disk_aut,
    inverse,
    preserves_unit_circle,
    rotation,
    to_disk_aut,
)

from conftest import random_moebius_entries

ABAR = MoebiusMap(1.5, 2.5, 0.5, 1.5)


def same_up_to_sign(m1, m2, tol=1e-12):
    d = np.max(np.abs(m1.matrix - m2.matrix))
    s = np.max(np.abs(m1.matrix + m2.matrix))
    return min(d, s) <= tol


def test_constructor_normalizes_determinant():
    m = MoebiusMap(2, 0, 0, 8)
    assert abs(m.det - 1) < 1e-15
    with pytest.raises(ValueError):
        MoebiusMap(1, 2, 2, 4)


def test_compose_identity_and_inverse():
    assert same_up_to_sign(compose(IDENTITY, ABAR), ABAR)
    assert same_up_to_sign(compose(ABAR, inverse(ABAR)), IDENTITY)


def test_compose_hand_product():
    assert same_up_to_sign(compose(ABAR, ABAR), MoebiusMap(3.5, 7.5, 1.5, 3.5))


def test_apply_values():
    assert apply(ABAR, 0) == pytest.approx(5 / 3, abs=1e-15)
    assert apply(IDENTITY, 0.3 - 2j) == 0.3 - 2j
    assert apply(MoebiusMap(1, 1, 0, 1), INF) is INF
    assert apply(ABAR, INF) == pytest.approx(3.0)  # a / c
    assert apply(ABAR, -3.0) is INF  # -d / c


def test_apply_array():
    z = np.array([0, 1j, -0.5])
    np.testing.assert_allclose(apply(ABAR, z), [apply(ABAR, complex(x)) for x in z])


def test_deriv_at_zero():
    assert deriv_at_zero(ABAR) == pytest.approx(4 / 9, abs=1e-15)
    assert deriv_at_zero(IDENTITY) == 1
    with pytest.raises(PoleAtOrigin):
        deriv_at_zero(MoebiusMap(0, 1, -1, 0))


def test_disk_automorphism_derivative():
    aut = DiskAutomorphism(cmath.exp(0.7j), 0.3 - 0.4j)
    m = from_disk_aut(aut)
    assert abs(abs(deriv_at_zero(m)) - (1 - abs(aut.a) ** 2)) < 1e-12
    assert abs(abs(apply(m, 0)) - abs(aut.a)) < 1e-12


def test_classify():
    assert classify(MoebiusMap(1, 1, 0, 1)) is MoebiusType.PARABOLIC
    assert classify(ABAR) is MoebiusType.LOXODROMIC
    assert classify(IDENTITY) is MoebiusType.IDENTITY
    assert classify(rotation(0.5)) is MoebiusType.ELLIPTIC


def test_fuchsian_commutator_parabolic(pair):
    c = commutator(pair.fuchsian_A, pair.fuchsian_B)
    assert abs(c.trace**2 - 4) < 1e-9
    assert classify(c) is MoebiusType.PARABOLIC


def test_disk_aut_round_trip():
    aut = DiskAutomorphism(1j, 0.3)
    back = to_disk_aut(from_disk_aut(aut))
    assert abs(back.lam - 1j) < 1e-12 and abs(back.a - 0.3) < 1e-12
    assert same_up_to_sign(from_disk_aut(DiskAutomorphism(1, 0)), IDENTITY)
    assert abs(from_disk_aut(aut).det - 1) < 1e-12


def test_to_disk_aut_rejects():
    with pytest.raises(NotDiskPreserving):
        to_disk_aut(ABAR)
    with pytest.raises(NotDiskPreserving):
        to_disk_aut(MoebiusMap(0, 1, 1, 0))  # z -> 1/z swaps disk and exterior


def test_disk_automorphism_invariants():
    with pytest.raises(ValueError):
        DiskAutomorphism(1.1, 0)
    with pytest.raises(ValueError):
        DiskAutomorphism(1, 1.0)


def test_cayley():
    for d in ("halfplane_to_disk", "disk_to_halfplane"):
        assert same_up_to_sign(cayley(IDENTITY, d), IDENTITY)
        c = cayley(ABAR, d)
        assert min(abs(c.trace - ABAR.trace), abs(c.trace + ABAR.trace)) < 1e-12
    assert preserves_unit_circle(cayley(ABAR, "halfplane_to_disk"))
    # ETA sends the disk onto the upper half-plane
    assert apply(ETA, 0).imag > 0 and apply(ETA, 0.5j).imag > 0


def test_json_round_trip():
    m = MoebiusMap(1 + 2j, 3, -1j, 0.5)
    back = MoebiusMap.from_dict(m.to_dict())
    assert np.array_equal(back.matrix, m.matrix)
    aut = DiskAutomorphism(cmath.exp(1j), 0.1 + 0.2j)
    assert DiskAutomorphism.from_dict(aut.to_dict()) == aut
    assert set(aut.to_dict()) == {"lambda", "a"}


def test_random_group_laws():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        m1, m2, m3 = (MoebiusMap(*random_moebius_entries(rng)) for _ in range(3))
        lhs, rhs = compose(compose(m1, m2), m3), compose(m1, compose(m2, m3))
        scale = max(1.0, np.max(np.abs(lhs.matrix)))
        assert np.max(np.abs(lhs.matrix - rhs.matrix)) <= 1e-12 * scale
        assert same_up_to_sign(compose(m1, inverse(m1)), IDENTITY, 1e-12 * np.max(np.abs(m1.matrix)) ** 2)
        assert abs(lhs.det - 1) < 1e-12


entries = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@given(entries, entries, entries, entries, entries, entries, entries, entries)
def test_chain_rule_at_zero(a1, b1, c1, d1, a2, b2, c2, d2):
    try:
        m1, m2 = MoebiusMap(a1, b1, c1, d1), MoebiusMap(a2, b2, c2, d2)
    except ValueError:
        return
    if abs(m1.det - 1) > 1e-12 or abs(m2.det - 1) > 1e-12:
        return  # near-singular input lost precision in normalization
    z2 = apply(m2, 0)
    if z2 is INF or abs(m2.d) < 1e-3 or abs(m1.c * z2 + m1.d) < 1e-3:
        return
    prod = compose(m1, m2)
    lhs = deriv_at_zero(prod)
    rhs = deriv_at(m1, z2) * deriv_at_zero(m2)
    cond = max(1.0, np.max(np.abs(m1.matrix)) * np.max(np.abs(m2.matrix))) ** 2
    assert abs(lhs - rhs) <= 1e-10 * abs(rhs) * cond


@given(st.floats(-math.pi, math.pi), st.floats(0, 0.999), st.floats(-math.pi, math.pi))
def test_disk_aut_properties(phi, r, arg):
    aut = DiskAutomorphism(cmath.exp(1j * phi), r * cmath.exp(1j * arg))
    m = from_disk_aut(aut)
    assert abs(m.det - 1) < 1e-12
    assert abs(abs(deriv_at_zero(m)) - (1 - abs(aut.a) ** 2)) <= 1e-12 / max(1e-3, 1 - r)
    back = to_disk_aut(m, tol=1e-6)
    assert abs(back.lam - aut.lam) < 1e-9 / max(1e-3, 1 - r) ** 2
    assert abs(back.a - aut.a) < 1e-12 / max(1e-3, 1 - r)
