"""Command-line entry point for the reconciliation simulator."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .decoder import DecoderConfig
from .ldpc import CodePool
from .session import BlockConfig
from .sim import ExperimentSpec, run_experiment, summary_csv
from .verify import DEFAULT_PRIME, FieldParams
from .wire import ProtocolError

PROFILES = {
    "ci": dict(n_fr=4000, n_subblocks=8, blocks=10),
    "paper": dict(n_fr=4000, n_subblocks=256, blocks=1),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="blindrec",
        description="Simulate blind LDPC reconciliation with hash verification over a BSC.",
    )
    p.add_argument("--profile", choices=sorted(PROFILES), default="ci")
    p.add_argument("--n-fr", type=int, help="LDPC frame length (multiple of 20)")
    p.add_argument("--n-subblocks", type=int, help="sub-blocks per block")
    p.add_argument("--blocks", type=int, help="number of blocks to simulate")
    p.add_argument("--qber", type=float, default=0.02, help="true channel flip probability")
    p.add_argument("--qber-est", type=float, help="QBER estimate used by the protocol (default: --qber)")
    p.add_argument("--prime", type=int, default=DEFAULT_PRIME, help="hash modulus")
    p.add_argument("--matrix-dir", type=Path, help="alist pool directory (generated there if missing)")
    p.add_argument("--max-iter", type=int, default=DecoderConfig.max_iterations)
    p.add_argument("--max-extra-rounds", type=int, default=10)
    p.add_argument("--fer", type=float, default=1e-5, help="FER for the analytic leakage column")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path, default=Path("report.jsonl"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    prof = PROFILES[args.profile]
    n_fr = args.n_fr or prof["n_fr"]
    q_est = args.qber if args.qber_est is None else args.qber_est
    try:
        block = BlockConfig(
            n_fr=n_fr,
            n_subblocks=args.n_subblocks or prof["n_subblocks"],
            q_est=q_est,
            field=FieldParams(args.prime),
            decoder=DecoderConfig(max_iterations=args.max_iter),
            max_extra_rounds=args.max_extra_rounds,
        )
        spec = ExperimentSpec(
            blocks=args.blocks or prof["blocks"],
            q_true=args.qber,
            block=block,
            out=args.out,
            seed=args.seed,
            fer_analytic=args.fer,
        )
        pool = CodePool.load_or_generate(args.matrix_dir, n_fr) if args.matrix_dir else CodePool.generate(n_fr)
        summary = run_experiment(spec, pool)
    except ProtocolError as exc:
        print(f"protocol abort: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    sys.stdout.write(summary_csv(summary))
    if summary["mismatched_blocks"]:
        print(f"{summary['mismatched_blocks']} block(s) ended with unequal keys", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
