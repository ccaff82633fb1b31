import numpy as np
import pytest

from blindrec.ldpc import CodePool, ParityCheckMatrix


@pytest.fixture(scope="session")
def pool(tmp_path_factory):
    """Default n_fr=4000 pool, generated once per test session."""
    return CodePool.load_or_generate(tmp_path_factory.mktemp("pool"), 4000)


def regular_code(rng, n=16, m=8, dv=3, dc=6) -> ParityCheckMatrix:
    """Random (dv, dc)-regular matrix from a socket permutation, rejecting repeated edges."""
    while True:
        cols = rng.permutation(np.repeat(np.arange(m), dc)).reshape(n, dv)
        if all(len(set(c)) == dv for c in cols):
            dense = np.zeros((m, n), dtype=np.uint8)
            for j, c in enumerate(cols):
                dense[c, j] = 1
            return ParityCheckMatrix.from_dense(dense)


def all_patterns(n: int) -> np.ndarray:
    return ((np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)


def coset_leaders(H: ParityCheckMatrix, syndrome) -> np.ndarray:
    """All minimum-weight patterns with the given syndrome, by exhaustive search."""
    pats = all_patterns(H.n_cols)
    syn = (pats.astype(np.int64) @ H.to_dense().T.astype(np.int64)) % 2
    match = pats[np.all(syn == np.asarray(syndrome), axis=1)]
    w = match.sum(axis=1)
    return match[w == w.min()]
