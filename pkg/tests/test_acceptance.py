"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py`` (add ``-m "not slow"`` to skip the
end-to-end run). Lines are printed straight to the terminal.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest

from blindrec.decoder import bp_decode, disclosure_size
from blindrec.ldpc import RATES, compute_syndrome
from blindrec.rate_adapt import select_rate
from blindrec.session import BlockConfig, run_block
from blindrec.sim import ExperimentSpec, gen_sifted_pair, run_experiment
from blindrec.verify import (
    AliceVerifier,
    BobVerifier,
    FieldParams,
    HashKeySource,
    expected_leakage,
    poly_hash,
    poly_hash_many,
    verification_fail_bound,
)
from conftest import coset_leaders, regular_code


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


def test_c1_expected_leakage(report):
    leak = expected_leakage(1e-5, 256, 50)
    report(1, 82.5 <= leak <= 83.0, f"leak_ver(F=1e-5, N=256, l_ht=50) = {leak:.3f} bit = {leak / 50:.3f} l_ht")


def test_c2_baseline_ratio(report):
    baseline = 256 * FieldParams().l_ht
    ratio = baseline / expected_leakage(1e-5, 256, 50)
    report(2, baseline == 12800 and 154 <= ratio <= 156, f"baseline = {baseline} bit, ratio = {ratio:.2f}")


def test_c3_verification_bound(report):
    eps = verification_fail_bound(256 * 3800, 3800, 256)
    report(3, eps <= 5e-11, f"eps_ver(n_sb=3800, N=256, p=2^50-27) = {eps:.4e}")


def test_c4_disclosure_table(report):
    table = [disclosure_size(r) for r in RATES]
    report(4, table == [20, 22, 24, 26, 28, 30, 32, 34, 36], f"d = {table}")


def brute_force_rate(q):
    h = -q * math.log2(q) - (1 - q) * math.log2(1 - q)
    best = None
    for k in range(10, 19):
        s = math.ceil(h * 4000 - 3800 * (20 - k) / 20)
        if 0 <= s <= 200 and (best is None or k > best[0]):
            best = (k, s)
    if best is None and math.ceil(h * 4000 - 380) < 0:
        best = (18, 0)
    return Fraction(best[0], 20), best[1], 200 - best[1]


def test_c5_rate_oracle(report):
    t0 = time.perf_counter()
    grid = [round(0.01 + 0.005 * i, 3) for i in range(22)]
    bad = []
    for q in grid:
        got = select_rate(q, 4000)
        r, s, p = got
        if not (s >= 0 and p >= 0 and s + p == 200 and got == brute_force_rate(q)):
            bad.append(q)
    dt = time.perf_counter() - t0
    report(5, not bad and dt < 1, f"{len(grid) - len(bad)}/{len(grid)} grid points agree with brute force ({dt * 1e3:.1f} ms)")


def test_c6_decoder_oracle(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2026)
    prior = math.log(0.95 / 0.05)
    sampled = converged = agree = 0
    syndrome_ok = True
    while sampled < 200:
        H = regular_code(rng)
        e = np.zeros(16, dtype=np.uint8)
        e[rng.choice(16, int(rng.integers(1, 3)), replace=False)] = 1
        s = compute_syndrome(e, H)
        leaders = coset_leaders(H, s)
        r = bp_decode(s, np.full(16, prior), H)
        if r.converged and not np.array_equal(compute_syndrome(r.error_pattern, H), s):
            syndrome_ok = False
        if len(leaders) != 1:
            continue
        sampled += 1
        if r.converged:
            converged += 1
            agree += np.array_equal(r.error_pattern, leaders[0])
    frac = agree / converged if converged else 0.0
    dt = time.perf_counter() - t0
    report(
        6,
        syndrome_ok and frac >= 0.95 and dt < 30,
        f"200 unique-leader instances, {converged} converged, oracle agreement {frac:.1%}, "
        f"syndrome always satisfied: {syndrome_ok} ({dt:.1f} s)",
    )


@pytest.mark.slow
def test_c7_end_to_end(pool, tmp_path, report):
    t0 = time.perf_counter()
    spec = ExperimentSpec(100, 0.02, BlockConfig(n_subblocks=8, q_est=0.02), tmp_path / "e2e.jsonl", seed=7)
    s = run_experiment(spec, pool)
    dt = time.perf_counter() - t0
    report(
        7,
        s["mismatched_blocks"] == 0 and dt < 300,
        f"100 blocks x 8 sub-blocks: {s['mismatched_blocks']} mismatched blocks, "
        f"measured FER {s['empirical_fer']:.3f}, mean rounds {s['mean_rounds']:.1f} ({dt:.0f} s)",
    )


def test_c8_hash_universality(report):
    t0 = time.perf_counter()
    params = FieldParams(251)
    rng = np.random.default_rng(8)
    total, batch, length = 10**6, 10**5, 10 * params.l_p
    collisions = 0
    for _ in range(total // batch):
        x = rng.integers(0, 2, (batch, length), dtype=np.uint8)
        y = rng.integers(0, 2, (batch, length), dtype=np.uint8)
        same = np.all(x == y, axis=1)
        y[same, 0] ^= 1
        k = rng.integers(0, params.p, batch)
        hx, hy = poly_hash_many(x, k, params), poly_hash_many(y, k, params)
        collisions += int(np.count_nonzero(hx == hy))
    # spot-check the batched path against the scalar reference
    consistent = all(poly_hash(x[i], int(k[i]), params) == hx[i] for i in range(0, batch, 997))
    bound = 9 / 251
    slack = 3 * math.sqrt(bound * (1 - bound) / total)
    frac = collisions / total
    dt = time.perf_counter() - t0
    report(
        8,
        consistent and frac <= bound + slack and dt < 60,
        f"collision fraction {frac:.5f} <= {bound:.5f} + {slack:.5f} ({dt:.1f} s)",
    )


def test_c9_branch_accounting(report):
    n, params = 8, FieldParams()
    rng = np.random.default_rng(9)
    parts = [rng.integers(0, 2, 3800, dtype=np.uint8) for _ in range(n)]
    got = []
    for corrupted in (0, 1, 3):
        other = [p.copy() for p in parts]
        for i in range(corrupted):
            other[i][i] ^= 1
        alice = AliceVerifier(parts, params, HashKeySource(corrupted))
        bob = BobVerifier(other, params)
        msg = alice.start()
        while msg is not None:
            msg = bob.receive(msg)
            msg = alice.receive(msg) if msg is not None else None
        got.append(alice.outcome.hash_bits)
    expected = [50, (n + 1) * 50, (n + 1) * 50]
    report(9, got == expected, f"hash bits for 0/1/3 corrupted sub-blocks: {got} (expected {expected})")


def test_c10_determinism(pool, tmp_path, report):
    cfg = BlockConfig(n_subblocks=8, session_seed=10)
    a, b = gen_sifted_pair(cfg.n_b, 0.02, 10)
    first = run_block(a, b, cfg, pool)
    second = run_block(a, b, cfg, pool)
    same_block = (
        first[2].transcript == second[2].transcript
        and first[2].to_record() == second[2].to_record()
        and np.array_equal(first[0], second[0])
        and np.array_equal(first[1], second[1])
    )
    files = []
    for name in ("x", "y"):
        spec = ExperimentSpec(2, 0.02, BlockConfig(n_subblocks=4), tmp_path / f"{name}.jsonl", seed=10)
        run_experiment(spec, pool)
        files.append((spec.out.read_bytes(), spec.summary_path.read_bytes()))
    report(
        10,
        same_block and files[0] == files[1],
        f"transcripts ({len(first[2].transcript)} frames), reports and keys identical across runs",
    )
