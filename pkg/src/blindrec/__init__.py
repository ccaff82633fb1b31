"""Symmetric blind LDPC reconciliation with polynomial-hash verification."""

from .decoder import DecodeResult, DecoderConfig, bp_decode, init_llrs, select_disclosure
from .ldpc import (
    RATES,
    CodePool,
    DegreeDistribution,
    ParityCheckMatrix,
    binary_entropy,
    compute_syndrome,
    load_alist,
    peg_generate,
    save_alist,
)
from .rate_adapt import ExtensionPlan, build_extended_key, choose_punctured, choose_shortened, select_rate
from .sbec import Role, SbecOutcome, SbecParty, Status
from .session import BlockConfig, BlockReport, LeakageLedger, record_leakage, run_block
from .sim import ExperimentSpec, gen_sifted_pair, run_experiment
from .verify import (
    FieldParams,
    collision_bound,
    expected_leakage,
    poly_hash,
    verification_fail_bound,
)
from .wire import ProtocolMessage, Tag, decode_message, encode_message

__version__ = "0.1.0"
