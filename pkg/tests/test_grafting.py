import cmath
import math

import numpy as np
import pytest

from brennan import grafting, words
from brennan.grafting import (
    FUNDAMENTAL_VERTICES,
    GraftingParams,
    base_boundary_point,
    commutator_traces,
    generator_A,
    generator_B,
    group_pair,
    render_tiles,
    resolve_construction,
    theta0,
    tile_count,
)
from brennan.moebius import INF, MoebiusType, apply, classify, preserves_unit_circle


def test_constants():
    lam = grafting.LAMBDA_LEN
    assert abs(math.cosh(lam / 2) - 1.5) < 1e-14
    assert abs(math.cosh(lam / 4) - math.sqrt(5) / 2) < 1e-14
    assert abs(math.sinh(lam / 4) - 0.5) < 1e-14
    assert abs(math.tanh(lam / 4) * grafting.COTH_QUARTER - 1) < 1e-14
    assert abs(math.exp(lam / 2) * math.exp(-lam / 2) - 1) < 1e-15
    with pytest.raises(ValueError):
        GraftingParams(lambda_len=1.0)


def test_generator_A():
    a = generator_A()
    np.testing.assert_allclose(a.matrix, [[1.5, 2.5], [0.5, 1.5]], atol=1e-15)
    assert abs(a.det - 1) < 1e-12
    assert classify(a) is MoebiusType.LOXODROMIC


def test_generator_B_real_at_zero():
    b = generator_B(0.0)
    np.testing.assert_allclose(b.matrix.imag, 0, atol=1e-12)
    # cosh(lam/4) = sqrt(5)/2, sinh(lam/4) = 1/2, coth(lam/4) = sqrt(5)
    np.testing.assert_allclose(b.matrix.real, [[2.5, -0.5], [-0.5, 0.5]], atol=1e-12)


def test_generator_B_theta0_independent_oracle():
    # cosh(x + iy) = cosh x cos y + i sinh x sin y, sinh(x + iy) = sinh x cos y + i cosh x sin y
    x, y = grafting.LAMBDA_LEN / 4, theta0() / 2
    ch = complex(math.cosh(x) * math.cos(y), math.sinh(x) * math.sin(y))
    sh = complex(math.sinh(x) * math.cos(y), math.cosh(x) * math.sin(y))
    expect = np.array([[ch * math.sqrt(5), -sh], [-sh, ch / math.sqrt(5)]])
    np.testing.assert_allclose(generator_B(theta0()).matrix, expect, atol=1e-13)


def test_generator_B_determinant():
    for th in [0.0, theta0(), 1.0, *np.random.default_rng(1).uniform(-3, 3, 100)]:
        assert abs(generator_B(th).det - 1) < 1e-12


def test_generator_B_lipschitz():
    th = np.linspace(-2, 0, 201)
    mats = np.array([generator_B(t).matrix for t in th])
    fd = np.abs(np.diff(mats, axis=0)) / np.diff(th)[:, None, None]
    assert np.max(fd) < 2.0  # entries are cosh/sinh of (lam/2 + i theta)/2


def test_theta0():
    assert abs(math.cos(theta0() + math.pi) - 1 / 9) < 1e-15
    assert theta0() < 0
    assert theta0() == pytest.approx(-1.6821373, abs=1e-7)


def test_base_boundary_point():
    assert abs(base_boundary_point() - (-2.618034j)) < 1e-6
    assert abs(base_boundary_point() + 1j * (3 + math.sqrt(5)) / 2) < 1e-14


def test_construction_resolution():
    chk = resolve_construction()
    assert chk.passed
    assert chk.seed_fixed and chk.bounded
    assert abs(chk.seed) == pytest.approx(1.0, abs=1e-12)


def test_group_pair_invariants(pair):
    for m in (pair.fuchsian_A, pair.fuchsian_B, pair.kleinian_A, pair.kleinian_B):
        assert abs(m.det - 1) < 1e-12
    np.testing.assert_allclose(pair.fuchsian_A.matrix.imag, 0, atol=1e-12)
    np.testing.assert_allclose(pair.fuchsian_B.matrix.imag, 0, atol=1e-12)
    tf, tk = commutator_traces(pair)
    assert abs(tf**2 - 4) < 1e-9
    assert abs(tk**2 - 4) < 1e-9
    again = group_pair()
    assert again == pair


def test_fuchsian_pair_in_disk_model_preserves_circle(pair):
    from brennan.moebius import cayley

    assert preserves_unit_circle(cayley(pair.fuchsian_A, "halfplane_to_disk"))
    assert not preserves_unit_circle(pair.kleinian_B)  # bending leaves the disk


def test_seed_orbit_bounded(pair):
    rng = np.random.default_rng(3)
    gens = pair.kleinian_table()
    idx = rng.choice(words.population_size(10), 100, replace=False)
    pts = [apply(words.evaluate(words.word_from_index(int(i)), gens), pair.seed) for i in idx]
    assert all(p is not INF for p in pts)
    assert max(abs(p) for p in pts) < 10


def test_fundamental_vertex_images():
    a, b = generator_A(), generator_B(0.0)
    mc, mt, t, c = FUNDAMENTAL_VERTICES
    # A fixes +-coth(lam/4): the outer side is its axis
    assert apply(a, mc) == pytest.approx(mc, abs=1e-12)
    assert apply(a, c) == pytest.approx(c, abs=1e-12)
    # B sends the inner side [-tanh, tanh] onto the outer side [-coth, coth]
    assert apply(b, mt) == pytest.approx(mc, abs=1e-12)
    assert apply(b, t) == pytest.approx(c, abs=1e-12)


def test_render_tiles():
    tiles = render_tiles(0, model="halfplane")
    assert len(tiles) == 1
    ends = {round(p.real, 12) for arc in tiles[0][1] for p in arc.endpoints}
    assert ends == {round(v, 12) for v in FUNDAMENTAL_VERTICES}
    for n in range(4):
        assert len(render_tiles(n)) == tile_count(n) == 1 + sum(4 * 3 ** (k - 1) for k in range(1, n + 1))
    for _, arcs in render_tiles(2, theta=0.0, model="halfplane"):
        for arc in arcs:
            for p in arc.endpoints:
                assert abs(p.imag) < 1e-9 or abs(p) >= 10 - 1e-9  # real or clipped infinity
    with pytest.raises(ValueError):
        render_tiles(-1)
