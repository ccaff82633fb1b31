"""LDPC parity-check matrices: representation, PEG construction, alist I/O.

Matrices are stored as sorted column-index rows. CSR arrays used by the
syndrome routine and the belief-propagation kernel are derived once at
construction and cached on the (immutable) object.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numba
import numpy as np

#: Code-rate pool, highest rate first: 0.90, 0.85, ..., 0.50.
RATES: tuple[Fraction, ...] = tuple(Fraction(k, 20) for k in range(18, 9, -1))


class ConstructionError(ValueError):
    """Raised when a matrix cannot be built with the requested parameters."""


class AlistError(ValueError):
    """Malformed alist input; carries the offending 1-based line number."""

    def __init__(self, message: str, lineno: int):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def binary_entropy(q: float) -> float:
    """Binary entropy h(q) in bits, with 0*log2(0) taken as 0."""
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"probability out of range: {q!r}")
    if q == 0.0 or q == 1.0:
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def rate_label(rate: Fraction) -> str:
    return f"{float(rate):.2f}"


class ParityCheckMatrix:
    """Sparse binary parity-check matrix.

    Parameters
    ----------
    n_cols : int
        Frame length.
    rows : iterable of iterables of int
        Column indices of the ones in each row.
    rate : Fraction, optional
        Design rate. Defaults to ``(n_cols - n_rows) / n_cols``.

    Instances are treated as immutable; the CSR arrays are read-only.
    """

    def __init__(self, n_cols: int, rows: Iterable[Iterable[int]], rate: Fraction | None = None):
        norm = tuple(tuple(sorted(int(c) for c in r)) for r in rows)
        n_rows = len(norm)
        if n_cols <= 0 or n_rows <= 0:
            raise ConstructionError("matrix must have at least one row and one column")
        if rate is None:
            rate = Fraction(n_cols - n_rows, n_cols)
        rate = Fraction(rate)
        if round((1 - rate) * n_cols) != n_rows:
            raise ConstructionError(f"{n_rows} rows inconsistent with rate {rate} at n={n_cols}")
        covered = np.zeros(n_cols, dtype=bool)
        for j, r in enumerate(norm):
            if not r:
                raise ConstructionError(f"row {j} is empty")
            if len(set(r)) != len(r):
                raise ConstructionError(f"row {j} has duplicate column indices")
            if r[0] < 0 or r[-1] >= n_cols:
                raise ConstructionError(f"row {j} has a column index outside [0, {n_cols})")
            covered[list(r)] = True
        if not covered.all():
            raise ConstructionError(f"column {int(np.argmin(covered))} is not in any row")

        self.n_cols = int(n_cols)
        self.rows = norm
        self.rate = rate

        lengths = np.fromiter((len(r) for r in norm), dtype=np.int64, count=n_rows)
        row_ptr = np.zeros(n_rows + 1, dtype=np.int64)
        np.cumsum(lengths, out=row_ptr[1:])
        col_idx = np.fromiter((c for r in norm for c in r), dtype=np.int64, count=int(row_ptr[-1]))
        # Edges regrouped per column; stable sort keeps row order inside a column.
        var_edges = np.argsort(col_idx, kind="stable").astype(np.int64)
        var_ptr = np.zeros(n_cols + 1, dtype=np.int64)
        np.cumsum(np.bincount(col_idx, minlength=n_cols), out=var_ptr[1:])
        for arr in (row_ptr, col_idx, var_edges, var_ptr):
            arr.setflags(write=False)
        self.row_ptr = row_ptr
        self.col_idx = col_idx
        self.var_ptr = var_ptr
        self.var_edges = var_edges

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_edges(self) -> int:
        return int(self.row_ptr[-1])

    def column_degrees(self) -> np.ndarray:
        return np.diff(self.var_ptr)

    def row_degrees(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def column_rows(self, c: int) -> np.ndarray:
        """Row indices that contain column ``c``."""
        edges = self.var_edges[self.var_ptr[c]:self.var_ptr[c + 1]]
        return np.searchsorted(self.row_ptr, edges, side="right") - 1

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols), dtype=np.uint8)
        for j, r in enumerate(self.rows):
            dense[j, list(r)] = 1
        return dense

    @classmethod
    def from_dense(cls, dense, rate: Fraction | None = None) -> "ParityCheckMatrix":
        dense = np.asarray(dense)
        return cls(dense.shape[1], (np.flatnonzero(row) for row in dense), rate)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return self.n_cols == other.n_cols and self.rows == other.rows and self.rate == other.rate

    def __hash__(self) -> int:
        return hash((self.n_cols, self.rows, self.rate))

    def __repr__(self) -> str:
        return f"ParityCheckMatrix(n_cols={self.n_cols}, n_rows={self.n_rows}, rate={self.rate})"


def compute_syndrome(key, H: ParityCheckMatrix) -> np.ndarray:
    """Syndrome ``key @ H.T`` over GF(2) as a uint8 array of length ``H.n_rows``."""
    key = np.asarray(key, dtype=np.uint8)
    if key.shape != (H.n_cols,):
        raise ValueError(f"key length {key.shape} does not match n_cols={H.n_cols}")
    return np.bitwise_xor.reduceat(key[H.col_idx], H.row_ptr[:-1]).astype(np.uint8)


@dataclass(frozen=True)
class DegreeDistribution:
    """Column-degree distribution from the node perspective (degree -> fraction of columns)."""

    fractions: Mapping[int, float]

    def __post_init__(self):
        fr = {int(d): float(f) for d, f in self.fractions.items()}
        if not fr:
            raise ValueError("empty degree distribution")
        if any(d < 2 for d in fr):
            raise ValueError("column degrees must be >= 2")
        if any(f < 0 for f in fr.values()):
            raise ValueError("negative degree fraction")
        if abs(sum(fr.values()) - 1.0) > 1e-9:
            raise ValueError(f"degree fractions sum to {sum(fr.values())!r}, not 1")
        object.__setattr__(self, "fractions", dict(sorted(fr.items())))

    def mean_degree(self) -> float:
        return sum(d * f for d, f in self.fractions.items())

    def row_degree_target(self, n_cols: int, n_rows: int) -> float:
        return self.mean_degree() * n_cols / n_rows

    def column_counts(self, n_cols: int) -> dict[int, int]:
        """Number of columns per degree, rounded by the largest-remainder rule.

        Remainder ties go to the lower degree.
        """
        exact = {d: f * n_cols for d, f in self.fractions.items()}
        counts = {d: math.floor(x) for d, x in exact.items()}
        short = n_cols - sum(counts.values())
        by_remainder = sorted(exact, key=lambda d: (-(exact[d] - counts[d]), d))
        for d in by_remainder[:short]:
            counts[d] += 1
        return counts


@numba.njit(cache=True)
def _peg_edges(order, degrees, n_rows):  # pragma: no cover - compiled
    n_cols = degrees.shape[0]
    max_vdeg = 0
    total = 0
    for v in range(n_cols):
        total += degrees[v]
        if degrees[v] > max_vdeg:
            max_vdeg = degrees[v]
    cap = 2 * (total // n_rows + 1) + 8

    var_adj = np.full((n_cols, max_vdeg), -1, np.int64)
    vdeg = np.zeros(n_cols, np.int64)
    check_adj = np.full((n_rows, cap), -1, np.int64)
    cdeg = np.zeros(n_rows, np.int64)
    seen_c = np.full(n_rows, -1, np.int64)
    seen_v = np.full(n_cols, -1, np.int64)
    frontier = np.empty(n_cols, np.int64)
    nxt = np.empty(n_cols, np.int64)
    new_checks = np.empty(n_rows, np.int64)
    stamp = 0

    for oi in range(n_cols):
        v = order[oi]
        for k in range(degrees[v]):
            best = -1
            if k == 0:
                for c in range(n_rows):
                    if best < 0 or cdeg[c] < cdeg[best]:
                        best = c
            else:
                stamp += 1
                seen_v[v] = stamp
                for t in range(vdeg[v]):
                    seen_c[var_adj[v, t]] = stamp
                reached = vdeg[v]
                # level 1 checks are the existing neighbours; expand from them
                n_new = 0
                for t in range(vdeg[v]):
                    new_checks[n_new] = var_adj[v, t]
                    n_new += 1
                pick_unseen = False
                while True:
                    if reached == n_rows:
                        # all checks reachable: choose among the farthest level
                        for t in range(n_new):
                            c = new_checks[t]
                            if best < 0 or cdeg[c] < cdeg[best] or (cdeg[c] == cdeg[best] and c < best):
                                best = c
                        break
                    n_front = 0
                    for t in range(n_new):
                        c = new_checks[t]
                        for s in range(cdeg[c]):
                            u = check_adj[c, s]
                            if seen_v[u] != stamp:
                                seen_v[u] = stamp
                                nxt[n_front] = u
                                n_front += 1
                    n_new = 0
                    for t in range(n_front):
                        u = nxt[t]
                        for s in range(vdeg[u]):
                            c = var_adj[u, s]
                            if seen_c[c] != stamp:
                                seen_c[c] = stamp
                                new_checks[n_new] = c
                                n_new += 1
                    if n_new == 0:
                        pick_unseen = True
                        break
                    reached += n_new
                if pick_unseen:
                    for c in range(n_rows):
                        if seen_c[c] != stamp:
                            if best < 0 or cdeg[c] < cdeg[best]:
                                best = c
            if best < 0:
                return var_adj, vdeg, check_adj, cdeg, False
            if cdeg[best] == check_adj.shape[1]:
                grown = np.full((n_rows, 2 * check_adj.shape[1]), -1, np.int64)
                grown[:, :check_adj.shape[1]] = check_adj
                check_adj = grown
            var_adj[v, vdeg[v]] = best
            vdeg[v] += 1
            check_adj[best, cdeg[best]] = v
            cdeg[best] += 1
    return var_adj, vdeg, check_adj, cdeg, True


def peg_generate(
    n_cols: int,
    n_rows: int,
    dist: DegreeDistribution,
    seed: int,
    rate: Fraction | None = None,
) -> ParityCheckMatrix:
    """Build a parity-check matrix by progressive edge growth.

    Column degrees follow ``dist`` (largest-remainder rounding); the seed only
    decides which columns receive which degree. Columns are processed in
    ascending degree order, each edge going to a check at maximal distance in
    the current graph, ties broken by lowest check degree then lowest index.
    """
    if not 0 < n_rows < n_cols:
        raise ConstructionError(f"need 0 < n_rows < n_cols, got {n_rows}x{n_cols}")
    counts = dist.column_counts(n_cols)
    if max(d for d, c in counts.items() if c) > n_rows:
        raise ConstructionError("a column degree exceeds the number of rows")
    if sum(d * c for d, c in counts.items()) < n_rows:
        raise ConstructionError("too few edges to cover every row")

    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_cols)
    degrees = np.empty(n_cols, dtype=np.int64)
    start = 0
    for d, c in counts.items():
        degrees[perm[start:start + c]] = d
        start += c
    order = np.lexsort((np.arange(n_cols), degrees)).astype(np.int64)

    var_adj, vdeg, check_adj, cdeg, ok = _peg_edges(order, degrees, n_rows)
    if not ok:
        raise ConstructionError("progressive edge growth ran out of candidate checks")
    rows = [check_adj[j, :cdeg[j]] for j in range(n_rows)]
    return ParityCheckMatrix(n_cols, rows, rate)


def load_distributions(path: str | Path | None = None) -> dict[Fraction, DegreeDistribution]:
    """Read per-rate column-degree distributions (the bundled file by default)."""
    if path is None:
        text = resources.files("blindrec.data").joinpath("degree_distributions.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    return {
        Fraction(label).limit_denominator(20): DegreeDistribution({int(d): f for d, f in fr.items()})
        for label, fr in raw["rates"].items()
    }


# ---------------------------------------------------------------------------
# alist


def save_alist(H: ParityCheckMatrix, path: str | Path) -> None:
    col_rows = [H.column_rows(c) for c in range(H.n_cols)]
    max_c = int(H.column_degrees().max())
    max_r = int(H.row_degrees().max())

    def padded(idx: Sequence[int], width: int) -> str:
        vals = [int(i) + 1 for i in idx] + [0] * (width - len(idx))
        return " ".join(map(str, vals))

    lines = [
        f"{H.n_cols} {H.n_rows}",
        f"{max_c} {max_r}",
        " ".join(str(len(r)) for r in col_rows),
        " ".join(str(len(r)) for r in H.rows),
    ]
    lines += [padded(r, max_c) for r in col_rows]
    lines += [padded(r, max_r) for r in H.rows]
    Path(path).write_text("\n".join(lines) + "\n")


def load_alist(path: str | Path, rate: Fraction | None = None) -> ParityCheckMatrix:
    """Parse a MacKay alist file. Zero padding in the index lists is optional."""
    lines = [(i + 1, ln.split()) for i, ln in enumerate(Path(path).read_text().splitlines())]
    lines = [(i, toks) for i, toks in lines if toks]
    pos = 0

    def take(expected: int | None = None) -> tuple[int, list[int]]:
        nonlocal pos
        if pos >= len(lines):
            last = lines[-1][0] if lines else 0
            raise AlistError("unexpected end of file", last + 1)
        lineno, toks = lines[pos]
        pos += 1
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise AlistError(f"non-integer token in {' '.join(toks)!r}", lineno) from None
        if expected is not None and len(vals) != expected:
            raise AlistError(f"expected {expected} values, found {len(vals)}", lineno)
        return lineno, vals

    lineno, (n, m) = take(2)
    if n <= 0 or m <= 0:
        raise AlistError("matrix dimensions must be positive", lineno)
    lineno, (max_c, max_r) = take(2)
    lineno, col_deg = take(n)
    if max(col_deg) > max_c or min(col_deg) < 0:
        raise AlistError("column degree outside [0, max column degree]", lineno)
    lineno, row_deg = take(m)
    if max(row_deg) > max_r or min(row_deg) < 0:
        raise AlistError("row degree outside [0, max row degree]", lineno)

    col_sets = []
    for c in range(n):
        lineno, vals = take()
        idx = [v for v in vals if v != 0]
        if len(idx) != col_deg[c]:
            raise AlistError(f"column {c + 1} lists {len(idx)} rows, degree says {col_deg[c]}", lineno)
        if any(not 1 <= v <= m for v in idx):
            raise AlistError(f"row index out of range 1..{m}", lineno)
        col_sets.append(idx)
    rows = []
    for r in range(m):
        lineno, vals = take()
        idx = [v for v in vals if v != 0]
        if len(idx) != row_deg[r]:
            raise AlistError(f"row {r + 1} lists {len(idx)} columns, degree says {row_deg[r]}", lineno)
        if any(not 1 <= v <= n for v in idx):
            raise AlistError(f"column index out of range 1..{n}", lineno)
        rows.append([v - 1 for v in idx])

    from_cols = sorted((r - 1, c) for c, idx in enumerate(col_sets) for r in idx)
    from_rows = sorted((r, c) for r, idx in enumerate(rows) for c in idx)
    if from_cols != from_rows:
        raise AlistError("column lists and row lists describe different matrices", lineno)
    try:
        return ParityCheckMatrix(n, rows, rate)
    except ConstructionError as exc:
        raise AlistError(str(exc), lineno) from None


# ---------------------------------------------------------------------------
# code pool


@dataclass(frozen=True)
class CodePool:
    """Nine parity-check matrices of common frame length, keyed by rate."""

    codes: Mapping[Fraction, ParityCheckMatrix]

    def __post_init__(self):
        if set(self.codes) != set(RATES):
            raise ValueError(f"pool needs exactly the rates {[rate_label(r) for r in RATES]}")
        lengths = {H.n_cols for H in self.codes.values()}
        if len(lengths) != 1:
            raise ValueError(f"pool frame lengths differ: {sorted(lengths)}")
        for r, H in self.codes.items():
            if H.rate != r:
                raise ValueError(f"matrix stored under {rate_label(r)} has rate {H.rate}")

    @property
    def n_fr(self) -> int:
        return next(iter(self.codes.values())).n_cols

    @property
    def rates(self) -> tuple[Fraction, ...]:
        return RATES

    def __getitem__(self, rate: Fraction) -> ParityCheckMatrix:
        return self.codes[Fraction(rate)]

    @classmethod
    def generate(
        cls,
        n_fr: int,
        seed: int = 0,
        distributions: Mapping[Fraction, DegreeDistribution] | None = None,
    ) -> "CodePool":
        check_frame_length(n_fr)
        dists = distributions or load_distributions()
        codes = {}
        for i, r in enumerate(RATES):
            n_rows = int((1 - r) * n_fr)
            codes[r] = peg_generate(n_fr, n_rows, dists[r], seed + i, rate=r)
        return cls(codes)

    @classmethod
    def load(cls, directory: str | Path) -> "CodePool":
        directory = Path(directory)
        return cls({r: load_alist(directory / f"r{rate_label(r)}.alist", rate=r) for r in RATES})

    def save(self, directory: str | Path) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for r, H in self.codes.items():
            save_alist(H, directory / f"r{rate_label(r)}.alist")

    @classmethod
    def load_or_generate(cls, directory: str | Path, n_fr: int, seed: int = 0) -> "CodePool":
        """Load the pool from ``directory``; generate and store it there if absent."""
        directory = Path(directory)
        if all((directory / f"r{rate_label(r)}.alist").exists() for r in RATES):
            pool = cls.load(directory)
            if pool.n_fr != n_fr:
                raise ValueError(f"matrices in {directory} have n_fr={pool.n_fr}, expected {n_fr}")
            return pool
        pool = cls.generate(n_fr, seed)
        pool.save(directory)
        return pool


def check_frame_length(n_fr: int) -> None:
    if n_fr <= 0 or n_fr % 20:
        raise ValueError(f"frame length must be a positive multiple of 20, got {n_fr}")
