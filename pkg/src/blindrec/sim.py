"""Monte Carlo harness: sifted-key pairs over a binary symmetric channel, many blocks, reports."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ldpc import CodePool
from .session import BlockConfig, run_block
from .verify import expected_leakage, verification_fail_bound

log = logging.getLogger(__name__)


def gen_sifted_pair(n: int, q: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Uniform bits for Alice; Bob's copy flips each bit independently with probability ``q``."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"flip probability out of range: {q!r}")
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, n, dtype=np.uint8)
    flips = (rng.random(n) < q).astype(np.uint8)
    return a, a ^ flips


@dataclass(frozen=True)
class ExperimentSpec:
    blocks: int
    q_true: float
    block: BlockConfig
    out: Path
    seed: int = 0
    fer_analytic: float = 1e-5

    def __post_init__(self):
        if self.blocks < 1:
            raise ValueError("need at least one block")
        if not 0.0 <= self.q_true < 0.5:
            raise ValueError("q_true must lie in [0, 0.5)")

    @property
    def summary_path(self) -> Path:
        return self.out.with_name(self.out.name + ".summary.csv")


def _block_seeds(seed: int, blocks: int) -> list[tuple[np.random.SeedSequence, int]]:
    out = []
    for child in np.random.SeedSequence(seed).spawn(blocks):
        channel, session = child.spawn(2)
        out.append((channel, int(session.generate_state(2, dtype=np.uint64)[0])))
    return out


def run_experiment(spec: ExperimentSpec, pool: CodePool) -> dict:
    """Run ``spec.blocks`` blocks, write the per-block JSON lines and the summary CSV.

    Returns the summary as a dict (also written to ``<out>.summary.csv``).
    """
    cfg = spec.block
    l_ht = cfg.field.l_ht
    records = []
    for b, (channel_seed, session_seed) in enumerate(_block_seeds(spec.seed, spec.blocks)):
        a, bob = gen_sifted_pair(cfg.n_b, spec.q_true, channel_seed)
        block_cfg = BlockConfig(**{**cfg.__dict__, "session_seed": session_seed})
        k_a, k_b, report = run_block(a, bob, block_cfg, pool)
        rec = {"block": b, "channel_errors": int(np.count_nonzero(a ^ bob))}
        rec.update(report.to_record())
        rec["key_mismatch_bits"] = int(np.count_nonzero(k_a ^ k_b)) if k_a.size == k_b.size else -1
        rec["keys_equal"] = bool(k_a.size == k_b.size and rec["key_mismatch_bits"] == 0)
        records.append(rec)
        log.info(
            "block %d: kept %d/%d sub-blocks, leak %d bits",
            b, cfg.n_subblocks - rec["sbec_failed"] - rec["verification_discarded"],
            cfg.n_subblocks, report.ledger.total,
        )

    total_sb = spec.blocks * cfg.n_subblocks
    failed = sum(r["sbec_failed"] for r in records)
    discarded = sum(r["verification_discarded"] for r in records)
    fer = (failed + discarded) / total_sb
    mean = lambda key: float(np.mean([r["ledger"][key] for r in records]))
    analytic = expected_leakage(spec.fer_analytic, cfg.n_subblocks, l_ht)
    empirical = expected_leakage(fer, cfg.n_subblocks, l_ht)
    baseline = cfg.n_subblocks * l_ht
    summary = {
        "blocks": spec.blocks,
        "subblocks_per_block": cfg.n_subblocks,
        "n_fr": cfg.n_fr,
        "n_sb": cfg.n_sb,
        "q_true": spec.q_true,
        "q_est": cfg.q_est,
        "prime": cfg.field.p,
        "l_ht": l_ht,
        "sbec_failed": failed,
        "verification_discarded": discarded,
        "empirical_fer": fer,
        "mismatched_blocks": sum(not r["keys_equal"] for r in records),
        "mean_verified_key_bits": float(np.mean([r["verified_key_length"] for r in records])),
        "mean_syndrome_bits": mean("syndrome_bits"),
        "mean_disclosed_bits": mean("disclosed_bits"),
        "mean_verification_hash_bits": mean("verification_hash_bits"),
        "mean_rounds": float(np.mean([x for r in records for x in r["rounds"]])),
        "eps_ver_bound": verification_fail_bound(cfg.n_b, cfg.n_sb, cfg.n_subblocks, cfg.field),
        "fer_analytic": spec.fer_analytic,
        "leak_ver_analytic": analytic,
        "leak_ver_at_empirical_fer": empirical,
        "leak_ver_baseline": baseline,
        "ratio_analytic": baseline / analytic,
        "ratio_empirical": baseline / mean("verification_hash_bits") if mean("verification_hash_bits") else float("nan"),
    }

    spec.out.parent.mkdir(parents=True, exist_ok=True)
    with open(spec.out, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    spec.summary_path.write_text(summary_csv(summary))
    return summary


def summary_csv(summary: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    for k, v in summary.items():
        w.writerow([k, repr(v) if isinstance(v, float) else v])
    return buf.getvalue()
