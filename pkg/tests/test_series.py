import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from brennan import series
from brennan.errors import BadBracket, InsufficientData, NonPositiveSum, PoleEncountered
from brennan.moebius import DiskAutomorphism, MoebiusMap, cayley, from_disk_aut, rotation
from brennan.series import (
    GeneratorQuadruple,
    NonMonotoneSlope,
    estimate_p_star,
    fit_decay,
    shell_sums,
    shell_sums_bruteforce,
    shell_sums_multi,
)
from brennan.words import count_reduced


def random_aut(rng, r_max=0.7):
    a = r_max * math.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform())
    return from_disk_aut(DiskAutomorphism(np.exp(2j * np.pi * rng.uniform()), a))


def random_quadruple(seed):
    rng = np.random.default_rng(seed)
    return GeneratorQuadruple(random_aut(rng), random_aut(rng), random_aut(rng), random_aut(rng))


@pytest.fixture(scope="module")
def model_quadruple(pair):
    """Fuchsian generators as the source, Kleinian ones as the target."""
    a = cayley(pair.fuchsian_A, "halfplane_to_disk")
    b = cayley(pair.fuchsian_B, "halfplane_to_disk")
    return GeneratorQuadruple(a, b, pair.kleinian_A, pair.kleinian_B)


def test_identity_shell_and_counts():
    t = shell_sums(random_quadruple(0), 4.0, 5)
    assert t.sums[0] == 1.0
    assert t.counts[3] == 36
    np.testing.assert_array_equal(t.counts[1:], [4 * 3 ** (n - 1) for n in range(1, 6)])
    assert np.all(t.sums > 0)


@pytest.mark.parametrize("seed", range(5))
def test_bruteforce_agreement(seed):
    gens = random_quadruple(seed)
    for p in (2.5, 4.0):
        dfs = shell_sums(gens, p, 6).sums
        brute = shell_sums_bruteforce(gens, p, 6)
        np.testing.assert_allclose(dfs, brute, rtol=1e-10, atol=0)


@given(st.integers(0, 10_000))
def test_trivial_homomorphism_is_p_independent(seed):
    rng = np.random.default_rng(seed)
    gens = GeneratorQuadruple.trivial(random_aut(rng), random_aut(rng))
    t3, t7 = shell_sums_multi(gens, [3.0, 7.0], 8)
    np.testing.assert_allclose(t3.sums, t7.sums, rtol=1e-12, atol=0)


def test_multi_matches_single(model_quadruple):
    multi = shell_sums_multi(model_quadruple, [3.0, 5.5], 9)
    for t in multi:
        np.testing.assert_array_equal(t.sums, shell_sums(model_quadruple, t.p, 9).sums)


def test_deterministic(model_quadruple):
    a = shell_sums(model_quadruple, 4.0, 10)
    b = shell_sums(model_quadruple, 4.0, 10)
    np.testing.assert_array_equal(a.sums, b.sums)
    np.testing.assert_array_equal(a.plain, b.plain)
    assert np.max(a.relative_discrepancy()) < 1e-12


def test_rotation_leaves_slopes_unchanged(model_quadruple):
    for p in (4.0, 5.5):
        s0 = fit_decay(shell_sums(model_quadruple, p, 11)).slope
        s1 = fit_decay(shell_sums(model_quadruple.conjugated(rotation(1.1)), p, 11)).slope
        assert abs(s0 - s1) < 0.01


def test_pole_encountered():
    rng = np.random.default_rng(3)
    flip = MoebiusMap(0, -1, 1, 0)
    gens = GeneratorQuadruple(random_aut(rng), random_aut(rng), flip, random_aut(rng))
    with pytest.raises(PoleEncountered):
        shell_sums(gens, 4.0, 1)
    with pytest.raises(PoleEncountered):
        shell_sums(gens, 4.0, 6)


def test_quadruple_validation():
    with pytest.raises(ValueError):
        GeneratorQuadruple(MoebiusMap(1, 2, 0, 1), MoebiusMap(1, 0, 0, 1), MoebiusMap(1, 0, 0, 1), MoebiusMap(1, 0, 0, 1))


def test_csv_header(tmp_path):
    t = shell_sums(random_quadruple(1), 4.0, 4)
    t.write_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "n,count,S_n,log_S_n" and len(lines) == 6


def test_fit_decay_exact():
    n = np.arange(15)
    fit = fit_decay(np.exp(-0.7 * n), 6)
    assert abs(fit.slope + 0.7) < 1e-12 and abs(fit.r_squared - 1) < 1e-12
    assert fit.n_min == 6


def test_fit_decay_noisy():
    rng = np.random.default_rng(0)
    n = np.arange(15)
    for _ in range(50):
        s = 5 * np.exp(0.3 * n) * (1 + 0.01 * rng.standard_normal(15))
        assert abs(fit_decay(s, 6).slope - 0.3) <= 0.02


def test_fit_decay_errors():
    with pytest.raises(InsufficientData):
        fit_decay(np.ones(8), 6)
    s = np.ones(12)
    s[9] = 0.0
    with pytest.raises(NonPositiveSum):
        fit_decay(s, 6)


def test_trivial_bracket_rejected(pair):
    a = cayley(pair.fuchsian_A, "halfplane_to_disk")
    b = cayley(pair.fuchsian_B, "halfplane_to_disk")
    with pytest.raises(BadBracket):
        estimate_p_star(GeneratorQuadruple.trivial(a, b), max_n=9, n_min=4)


def test_bisection_on_synthetic_slopes(monkeypatch):
    monkeypatch.setattr(series, "slope_at", lambda g, p, m, n: p - 5.53)
    res = estimate_p_star(None, p_lo=5.0, p_hi=6.0, tol=0.02)
    assert res.upper - res.lower <= 0.02 and res.lower < 5.53 < res.upper
    assert res.slope_at_lower < 0 < res.slope_at_upper and res.monotone


def test_non_monotone_warning(monkeypatch):
    monkeypatch.setattr(series, "slope_at", lambda g, p, m, n: (p - 5.53) + 0.2 * math.sin(40 * p))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        res = estimate_p_star(None, p_lo=5.0, p_hi=6.0, tol=0.02)
    assert not res.monotone
    assert any(issubclass(w.category, NonMonotoneSlope) for w in rec)
