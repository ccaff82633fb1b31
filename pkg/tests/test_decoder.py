import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blindrec.decoder import (
    DecodeResult,
    DecoderConfig,
    SubBlockExhausted,
    bp_decode,
    disclosure_size,
    init_llrs,
    select_disclosure,
)
from blindrec.ldpc import RATES, ParityCheckMatrix, compute_syndrome
from blindrec.rate_adapt import make_plan
from conftest import coset_leaders, regular_code

TOY = ParityCheckMatrix(6, [[0, 1, 3], [1, 2, 5], [3, 4, 5]])


def test_config_validation():
    with pytest.raises(ValueError):
        DecoderConfig(max_iterations=0)
    with pytest.raises(ValueError):
        DecoderConfig(llr_clamp=10.0, known_llr_magnitude=20.0)


def test_init_llrs(pool):
    H = pool[RATES[0]]
    plan = make_plan(H, 186, 14, 0, 1)
    s0, s1 = plan.shortened[:2]
    llr = init_llrs(0.02, plan, {int(s0): 0, int(s1): 1})
    assert np.all(llr[plan.punctured] == 0.0)
    assert llr[s0] == 25.0 and llr[s1] == -25.0
    assert llr[plan.omega[0]] == pytest.approx(3.8918, abs=1e-4)
    assert llr[plan.omega[0]] == pytest.approx(math.log(0.98 / 0.02))


def test_trivial_instance_converges_immediately():
    r = bp_decode(np.zeros(3, dtype=np.uint8), np.full(6, 5.0), TOY)
    assert r.converged and r.iterations_used == 1
    assert not r.error_pattern.any()


@pytest.mark.parametrize("pos", range(6))
def test_single_flip_matches_brute_force(pos):
    e = np.zeros(6, dtype=np.uint8)
    e[pos] = 1
    s = compute_syndrome(e, TOY)
    r = bp_decode(s, np.full(6, math.log(0.95 / 0.05)), TOY)
    assert r.converged
    assert np.array_equal(compute_syndrome(r.error_pattern, TOY), s)
    leaders = coset_leaders(TOY, s)
    if len(leaders) == 1:
        assert np.array_equal(r.error_pattern, leaders[0])
    else:
        assert r.error_pattern.sum() == leaders[0].sum()


def test_iteration_budget_exhaustion():
    rng = np.random.default_rng(4)
    H = regular_code(rng, n=60, m=30)
    s = compute_syndrome(rng.integers(0, 2, 60, dtype=np.uint8), H)
    r = bp_decode(s, np.full(60, math.log(0.95 / 0.05)), H, DecoderConfig(max_iterations=1))
    assert not r.converged and r.iterations_used == 1
    assert np.all(np.isfinite(r.final_llrs)) and np.abs(r.final_llrs).max() <= 25.0


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        bp_decode(np.zeros(4, dtype=np.uint8), np.zeros(6), TOY)
    with pytest.raises(ValueError):
        bp_decode(np.zeros(3, dtype=np.uint8), np.zeros(5), TOY)


@given(seed=st.integers(0, 2**32 - 1), weight=st.integers(0, 4))
@settings(max_examples=60, deadline=None)
def test_converged_results_satisfy_syndrome_and_are_deterministic(seed, weight):
    rng = np.random.default_rng(seed)
    H = regular_code(rng)
    e = np.zeros(16, dtype=np.uint8)
    e[rng.choice(16, weight, replace=False)] = 1
    s = compute_syndrome(e, H)
    priors = np.full(16, math.log(0.95 / 0.05))
    r1 = bp_decode(s, priors, H)
    r2 = bp_decode(s, priors, H)
    assert np.array_equal(r1.error_pattern, r2.error_pattern)
    assert np.array_equal(r1.final_llrs, r2.final_llrs)
    assert r1.iterations_used == r2.iterations_used
    if r1.converged:
        assert np.array_equal(compute_syndrome(r1.error_pattern, H), s)
    assert np.abs(r1.final_llrs).max() <= 25.0


def test_extreme_priors_stay_finite():
    s = np.array([1, 0, 1], dtype=np.uint8)
    r = bp_decode(s, np.array([1e9, -1e9, 1e9, 1e9, 0.0, -1e9]), TOY)
    assert np.all(np.isfinite(r.final_llrs))


def test_disclosure_size_table():
    assert [disclosure_size(r) for r in RATES] == [20, 22, 24, 26, 28, 30, 32, 34, 36]
    assert disclosure_size(Fraction(9, 10)) == 20
    assert disclosure_size(Fraction(1, 2)) == 36


def fake_result(llrs):
    llrs = np.asarray(llrs, dtype=float)
    return DecodeResult(False, np.zeros(llrs.size, dtype=np.uint8), llrs, 1)


def test_select_disclosure_least_reliable(monkeypatch):
    import blindrec.decoder as dec

    monkeypatch.setattr(dec, "disclosure_size", lambda rate: 2)
    out = select_disclosure(fake_result([0.1, 5.0, 0.2, 3.0]), Fraction(9, 10), [0, 1, 2, 3])
    assert out.tolist() == [0, 2]


def test_select_disclosure_ties_and_eligibility():
    llrs = np.ones(40)
    llrs[[3, 7]] = -0.5
    out = select_disclosure(fake_result(llrs), Fraction(9, 10), np.arange(1, 40))
    assert out[:2].tolist() == [3, 7]
    # remaining ties resolved by lowest index, position 0 is not eligible
    assert out[2:].tolist() == [i for i in range(1, 40) if i not in (3, 7)][:18]


def test_select_disclosure_exhausted():
    with pytest.raises(SubBlockExhausted):
        select_disclosure(fake_result(np.ones(30)), Fraction(9, 10), np.arange(19))
