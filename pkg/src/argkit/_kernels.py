"""Hot numeric kernels: numba-compiled loops with a pure-numpy fallback.

The numpy path is selected by setting ``ARGKIT_NO_NUMBA=1`` in the
environment before import, and automatically when numba is not importable.
Both paths implement the same integer/float arithmetic and produce
bit-identical outputs; ``tests/test_kernels.py`` asserts it and
``benchmarks/bench_kernels.py`` times it.

Base codes throughout: A=0, C=1, G=2, T=3, N=4.
"""

from __future__ import annotations

import os

import numpy as np

from ._mix import GOLDEN, M64, MIX_A, MIX_B

_U = np.uint64


def _env_disabled() -> bool:
    return os.environ.get("ARGKIT_NO_NUMBA", "").strip().lower() not in ("", "0", "false")


try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via ARGKIT_NO_NUMBA instead
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not _env_disabled()


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# splitmix64, vectorized (numpy path). Scalars stay 1-element arrays so the
# uint64 arithmetic wraps silently.
# ---------------------------------------------------------------------------

def _sm64_np(x: np.ndarray) -> np.ndarray:
    z = x + _U(GOLDEN)
    z = (z ^ (z >> _U(30))) * _U(MIX_A)
    z = (z ^ (z >> _U(27))) * _U(MIX_B)
    return z ^ (z >> _U(31))


# ---------------------------------------------------------------------------
# k-mer counting: stride-1 windows, windows containing N are skipped.
# ---------------------------------------------------------------------------

def _count_kmers_np(codes: np.ndarray, k: int, out: np.ndarray) -> None:
    n = codes.size
    if n < k:
        return
    m = n - k + 1
    idx = np.zeros(m, dtype=np.int64)
    valid = np.ones(m, dtype=bool)
    for j in range(k):
        w = codes[j : j + m]
        idx = (idx << 2) | w.astype(np.int64)
        valid &= w <= 3
    out += np.bincount(idx[valid] & ((1 << (2 * k)) - 1), minlength=out.size)


def _make_count_kmers_nb():
    @njit(cache=True)
    def _count_kmers_nb(codes, k, out):  # pragma: no cover - compiled
        mask = np.int64((1 << (2 * k)) - 1)
        idx = np.int64(0)
        run = 0
        for i in range(codes.size):
            c = codes[i]
            if c > 3:
                run = 0
                idx = np.int64(0)
            else:
                idx = ((idx << 2) | np.int64(c)) & mask
                if run < k:
                    run += 1
                if run == k:
                    out[idx] += 1
        return out

    return _count_kmers_nb


# ---------------------------------------------------------------------------
# Read error process. One event per template base: substitution (uniform over
# the 3 other bases), insertion (uniform base emitted before the template
# base), deletion, or copy. Draws are a pure function of (stream, position),
# so the sequential and vectorized paths agree exactly.
# ---------------------------------------------------------------------------

def _simulate_bases_np(ref, start, read_len, t_sub, t_ins, t_del, stream, out):
    n = ref.size
    span = n - start
    if span <= 0 or read_len <= 0:
        return 0, 0, 0, 0
    i_arr = np.arange(span, dtype=np.uint64)
    a = _sm64_np(_U(stream) ^ i_arr)
    u_ev = (_sm64_np(a ^ _U(1)) >> _U(11)).astype(np.float64) * 2.0**-53
    u_base = (_sm64_np(a ^ _U(2)) >> _U(11)).astype(np.float64) * 2.0**-53
    c = ref[start : start + span].astype(np.int64)

    ev = np.where(u_ev < t_sub, 0, np.where(u_ev < t_ins, 1, np.where(u_ev < t_del, 2, 3)))
    elen = np.where(ev == 2, 0, np.where(ev == 1, 2, 1))
    excl = np.zeros(span, dtype=np.int64)
    np.cumsum(elen[:-1], out=excl[1:])
    # the sequential loop processes a position iff output is still short of
    # read_len when it gets there; that set is a prefix
    processed = excl < read_len
    p = int(np.count_nonzero(processed))
    ev = ev[:p]
    elen = elen[:p]
    excl = excl[:p]
    c = c[:p]
    u_base = u_base[:p]

    r3 = (u_base * 3.0).astype(np.int64)
    repl = np.where(c > 3, (u_base * 4.0).astype(np.int64), r3 + (r3 >= c))
    insb = (u_base * 4.0).astype(np.int64)
    first = np.where(ev == 0, repl, np.where(ev == 1, insb, c))

    total = int(excl[-1] + elen[-1]) if p else 0
    big = np.zeros(total, dtype=np.uint8)
    has_first = elen > 0
    big[excl[has_first]] = first[has_first].astype(np.uint8)
    ins_mask = ev == 1
    big[excl[ins_mask] + 1] = c[ins_mask].astype(np.uint8)

    out_len = min(read_len, total)
    out[:out_len] = big[:out_len]
    n_sub = int(np.count_nonzero(ev == 0))
    n_ins = int(np.count_nonzero(ev == 1))
    n_del = int(np.count_nonzero(ev == 2))
    return out_len, n_sub, n_ins, n_del


def _make_simulate_bases_nb():
    @njit(cache=True)
    def _sm64_nb(x):  # pragma: no cover - compiled
        z = x + np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_A)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_B)
        return z ^ (z >> np.uint64(31))

    @njit(cache=True)
    def _simulate_bases_nb(ref, start, read_len, t_sub, t_ins, t_del, stream, out):  # pragma: no cover
        n = ref.size
        out_len = 0
        n_sub = 0
        n_ins = 0
        n_del = 0
        pos = start
        i = 0
        while out_len < read_len and pos < n:
            a = _sm64_nb(stream ^ np.uint64(i))
            u_ev = (_sm64_nb(a ^ np.uint64(1)) >> np.uint64(11)) * 2.0**-53
            c = ref[pos]
            if u_ev < t_sub:
                u_base = (_sm64_nb(a ^ np.uint64(2)) >> np.uint64(11)) * 2.0**-53
                if c > 3:
                    r = int(u_base * 4.0)
                else:
                    r = int(u_base * 3.0)
                    if r >= c:
                        r += 1
                out[out_len] = r
                out_len += 1
                n_sub += 1
            elif u_ev < t_ins:
                u_base = (_sm64_nb(a ^ np.uint64(2)) >> np.uint64(11)) * 2.0**-53
                out[out_len] = int(u_base * 4.0)
                out_len += 1
                n_ins += 1
                if out_len < read_len:
                    out[out_len] = c
                    out_len += 1
            elif u_ev < t_del:
                n_del += 1
            else:
                out[out_len] = c
                out_len += 1
            pos += 1
            i += 1
        return out_len, n_sub, n_ins, n_del

    return _simulate_bases_nb


if USE_NUMBA:
    _count_kmers_impl = _make_count_kmers_nb()
    _simulate_bases_impl = _make_simulate_bases_nb()
else:
    _count_kmers_impl = _count_kmers_np
    _simulate_bases_impl = _simulate_bases_np


def count_kmers(codes: np.ndarray, k: int, out: np.ndarray | None = None) -> np.ndarray:
    """Stride-1 k-mer counts of an encoded sequence into a 4**k vector."""
    if out is None:
        out = np.zeros(4**k, dtype=np.int64)
    _count_kmers_impl(np.ascontiguousarray(codes, dtype=np.uint8), k, out)
    return out


def simulate_bases(
    ref_codes: np.ndarray,
    start: int,
    read_len: int,
    sub_rate: float,
    ins_rate: float,
    del_rate: float,
    stream: int,
) -> tuple[np.ndarray, int, int, int]:
    """Apply the per-base error process to a template window.

    Returns (read codes, substitutions, insertions, deletions). The read is
    shorter than read_len only when deletions exhaust the template.
    """
    t_sub = float(sub_rate)
    t_ins = t_sub + float(ins_rate)
    t_del = t_ins + float(del_rate)
    out = np.zeros(read_len, dtype=np.uint8)
    out_len, n_sub, n_ins, n_del = _simulate_bases_impl(
        np.ascontiguousarray(ref_codes, dtype=np.uint8),
        int(start),
        int(read_len),
        t_sub,
        t_ins,
        t_del,
        _U(stream & M64),
        out,
    )
    return out[:out_len], n_sub, n_ins, n_del


__all__ = [
    "HAS_NUMBA",
    "USE_NUMBA",
    "backend_name",
    "count_kmers",
    "simulate_bases",
]
