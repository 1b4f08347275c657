"""Channel codes standing in for the LTE turbo code.

``conv-r12`` and ``conv-r13`` are zero-tailed convolutional codes (constraint length 7,
generators 133/171 and 133/171/165 octal) with soft Viterbi decoding; the shift
register holds the newest input bit in its MSB.

``turbo-r13`` and ``turbo-r12`` are a parallel concatenation of two 8-state recursive
systematic encoders (feedback 13, feedforward 15 octal, as in LTE) around a fixed
pseudo-random interleaver, each trellis-terminated with 3 tail steps. The rate-1/2
variant punctures the parities alternately. Decoding is iterative max-log-MAP.
"""

from __future__ import annotations

import numba
import numpy as np

__all__ = ["CODES", "code_rate", "coded_length", "max_info_bits", "fec_encode", "fec_decode", "turbo_interleaver"]

CONSTRAINT = 7
MEMORY = CONSTRAINT - 1
N_STATES = 1 << MEMORY
CODES = {"none": (), "conv-r12": (0o133, 0o171), "conv-r13": (0o133, 0o171, 0o165),
         "turbo-r12": "turbo", "turbo-r13": "turbo"}

TURBO_TAIL = 12  # 3 steps x (systematic, parity) per constituent encoder
TURBO_ITERATIONS = 8
_EXTRINSIC_SCALE = 0.75  # usual max-log correction


def _generators(code):
    try:
        return CODES[code]
    except KeyError:
        raise ValueError(f"unknown code {code!r}; choose from {sorted(CODES)}") from None


def _turbo_n(code):
    return 3 if code == "turbo-r13" else 2


def code_rate(code: str) -> float:
    """Nominal rate (tail bits ignored)."""
    g = _generators(code)
    if g == "turbo":
        return 1.0 / _turbo_n(code)
    return 1.0 / len(g) if g else 1.0


def coded_length(info_bits: int, code: str) -> int:
    g = _generators(code)
    if g == "turbo":
        return _turbo_n(code) * info_bits + TURBO_TAIL
    return (info_bits + MEMORY) * len(g) if g else info_bits


def max_info_bits(coded_bits: int, code: str) -> int:
    """Largest payload whose codeword fits in ``coded_bits``."""
    g = _generators(code)
    if g == "turbo":
        return (coded_bits - TURBO_TAIL) // _turbo_n(code)
    return coded_bits // len(g) - MEMORY if g else coded_bits


def _trellis(gens):
    reg = (np.arange(2)[None, :] << MEMORY) | np.arange(N_STATES)[:, None]  # (state, bit)
    out = np.stack([np.bitwise_count((reg & g).astype(np.uint8)) & 1 for g in gens], axis=-1)
    return reg >> 1, out.astype(np.int8)  # next_state, outputs (state, bit, n)


def fec_encode(bits, code: str) -> np.ndarray:
    """Encode along the last axis; the ``none`` code passes bits through."""
    gens = _generators(code)
    bits = np.asarray(bits, dtype=np.int8)
    if gens == "turbo":
        return _turbo_encode(bits, code)
    if not gens:
        return bits.copy()
    nxt, out = _trellis(gens)
    u = np.concatenate([bits, np.zeros(bits.shape[:-1] + (MEMORY,), np.int8)], axis=-1)
    state = np.zeros(bits.shape[:-1], dtype=np.int64)
    cw = np.empty(u.shape + (len(gens),), dtype=np.int8)
    for t in range(u.shape[-1]):
        b = u[..., t]
        cw[..., t, :] = out[state, b]
        state = nxt[state, b]
    return cw.reshape(*bits.shape[:-1], -1)


@numba.njit(cache=True)
def _viterbi(llr, out, n_info):
    # llr: (B, T, n); maximizes sum of (1 - 2c) * llr over the path
    B, T, n = llr.shape
    res = np.zeros((B, n_info), dtype=np.int8)
    dec = np.zeros((T, N_STATES), dtype=np.int8)
    pm = np.empty(N_STATES)
    new = np.empty(N_STATES)
    half = N_STATES // 2
    for bi in range(B):
        pm[:] = -1e300
        pm[0] = 0.0
        for t in range(T):
            for ns in range(N_STATES):
                b = ns // half
                best = -1e301
                choice = 0
                for x in range(2):
                    s = ((ns % half) << 1) | x
                    m = pm[s]
                    for j in range(n):
                        if out[s, b, j]:
                            m -= llr[bi, t, j]
                        else:
                            m += llr[bi, t, j]
                    if m > best:
                        best = m
                        choice = x
                new[ns] = best
                dec[t, ns] = choice
            pm[:] = new
        s = 0
        for t in range(T - 1, -1, -1):
            b = s // half
            if t < n_info:
                res[bi, t] = b
            s = ((s % half) << 1) | dec[t, s]
    return res


def fec_decode(llrs, code: str) -> np.ndarray:
    """Maximum-likelihood (soft Viterbi) decoding along the last axis.

    Positive LLRs favour bit 0. For ``none`` this is a hard decision.
    """
    gens = _generators(code)
    llrs = np.asarray(llrs, dtype=float)
    if gens == "turbo":
        return _turbo_decode(llrs, code)
    if not gens:
        return (llrs < 0).astype(np.int8)
    n = len(gens)
    if llrs.shape[-1] % n or llrs.shape[-1] // n <= MEMORY:
        raise ValueError(f"codeword length {llrs.shape[-1]} invalid for {code}")
    T = llrs.shape[-1] // n
    lead = llrs.shape[:-1]
    _, out = _trellis(gens)
    flat = np.ascontiguousarray(llrs.reshape(-1, T, n))
    return _viterbi(flat, out, T - MEMORY).reshape(*lead, T - MEMORY)


# --- turbo code -------------------------------------------------------------
# RSC state (d[k-1], d[k-2], d[k-3]) packed as d1 | d2 << 1 | d3 << 2

def _rsc_tables():
    nxt = np.empty((8, 2), dtype=np.int64)
    par = np.empty((8, 2), dtype=np.int8)
    for s in range(8):
        d1, d2, d3 = s & 1, (s >> 1) & 1, (s >> 2) & 1
        for u in range(2):
            d = u ^ d2 ^ d3
            par[s, u] = d ^ d1 ^ d3
            nxt[s, u] = d | (d1 << 1) | (d2 << 2)
    return nxt, par


_RSC_NEXT, _RSC_PAR = _rsc_tables()


def turbo_interleaver(k: int) -> np.ndarray:
    """Fixed pseudo-random permutation of length ``k`` (a function of ``k`` only)."""
    return np.random.default_rng([0x7E5B0, k]).permutation(k)


def _rsc_encode(u):
    # u: (B, K) -> parity (B, K), tail systematic (B, 3), tail parity (B, 3)
    B, K = u.shape
    state = np.zeros(B, dtype=np.int64)
    par = np.empty((B, K), np.int8)
    for t in range(K):
        par[:, t] = _RSC_PAR[state, u[:, t]]
        state = _RSC_NEXT[state, u[:, t]]
    tail_u = np.empty((B, 3), np.int8)
    tail_p = np.empty((B, 3), np.int8)
    for t in range(3):
        b = ((state >> 1) ^ (state >> 2)) & 1  # drives the feedback bit to 0
        tail_u[:, t] = b
        tail_p[:, t] = _RSC_PAR[state, b]
        state = _RSC_NEXT[state, b]
    return par, tail_u, tail_p


def _puncture_masks(k, code):
    keep1 = np.ones(k, bool)
    keep2 = np.ones(k, bool)
    if code == "turbo-r12":
        keep1[1::2] = False
        keep2[0::2] = False
    return keep1, keep2


def _turbo_encode(bits, code):
    lead, k = bits.shape[:-1], bits.shape[-1]
    u = bits.reshape(-1, k)
    perm = turbo_interleaver(k)
    p1, tu1, tp1 = _rsc_encode(u)
    p2, tu2, tp2 = _rsc_encode(u[:, perm])
    keep1, keep2 = _puncture_masks(k, code)
    tails = np.stack([tu1, tp1], -1).reshape(-1, 6), np.stack([tu2, tp2], -1).reshape(-1, 6)
    cw = np.concatenate([u, p1[:, keep1], p2[:, keep2], *tails], axis=1)
    return cw.reshape(*lead, -1)


@numba.njit(cache=True)
def _maxlog_map(ls, lp, la, nxt, par):
    # a-posteriori LLRs for the T = K + 3 trellis inputs; starts and ends in state 0
    T = ls.shape[0]
    alpha = np.full((T + 1, 8), -1e30)
    beta = np.full((T + 1, 8), -1e30)
    alpha[0, 0] = 0.0
    beta[T, 0] = 0.0
    for t in range(T):
        for s in range(8):
            a = alpha[t, s]
            if a < -1e29:
                continue
            for u in range(2):
                g = 0.5 * ((1 - 2 * u) * (ls[t] + la[t]) + (1 - 2 * par[s, u]) * lp[t])
                ns = nxt[s, u]
                if a + g > alpha[t + 1, ns]:
                    alpha[t + 1, ns] = a + g
    for t in range(T - 1, -1, -1):
        for s in range(8):
            best = -1e30
            for u in range(2):
                g = 0.5 * ((1 - 2 * u) * (ls[t] + la[t]) + (1 - 2 * par[s, u]) * lp[t])
                v = g + beta[t + 1, nxt[s, u]]
                if v > best:
                    best = v
            beta[t, s] = best
    out = np.empty(T)
    for t in range(T):
        m0 = -1e30
        m1 = -1e30
        for s in range(8):
            for u in range(2):
                g = 0.5 * ((1 - 2 * u) * (ls[t] + la[t]) + (1 - 2 * par[s, u]) * lp[t])
                v = alpha[t, s] + g + beta[t + 1, nxt[s, u]]
                if u == 0:
                    if v > m0:
                        m0 = v
                elif v > m1:
                    m1 = v
        out[t] = m0 - m1
    return out


@numba.njit(cache=True)
def _turbo_iterate(sys, p1, p2, ts1, tp1, ts2, tp2, perm, nxt, par, iters, scale):
    B, K = sys.shape
    res = np.zeros((B, K), dtype=np.int8)
    ls1 = np.zeros(K + 3)
    lp1 = np.zeros(K + 3)
    ls2 = np.zeros(K + 3)
    lp2 = np.zeros(K + 3)
    la = np.zeros(K + 3)
    for b in range(B):
        for t in range(K):
            ls1[t] = sys[b, t]
            lp1[t] = p1[b, t]
            ls2[t] = sys[b, perm[t]]
            lp2[t] = p2[b, t]
        for t in range(3):
            ls1[K + t] = ts1[b, t]
            lp1[K + t] = tp1[b, t]
            ls2[K + t] = ts2[b, t]
            lp2[K + t] = tp2[b, t]
        e2 = np.zeros(K)  # extrinsic from decoder 2, natural order
        e1 = np.zeros(K)
        for _ in range(iters):
            la[:] = 0.0
            la[:K] = e2
            post = _maxlog_map(ls1, lp1, la, nxt, par)
            for t in range(K):
                e1[t] = scale * (post[t] - ls1[t] - e2[t])
            la[:] = 0.0
            for t in range(K):
                la[t] = e1[perm[t]]
            post = _maxlog_map(ls2, lp2, la, nxt, par)
            for t in range(K):
                e2[perm[t]] = scale * (post[t] - ls2[t] - la[t])
        for t in range(K):
            res[b, t] = 1 if sys[b, t] + e1[t] + e2[t] < 0 else 0
    return res


def _turbo_decode(llrs, code):
    n = _turbo_n(code)
    length = llrs.shape[-1]
    if (length - TURBO_TAIL) % n or length - TURBO_TAIL < n:
        raise ValueError(f"codeword length {length} invalid for {code}")
    k = (length - TURBO_TAIL) // n
    lead = llrs.shape[:-1]
    x = llrs.reshape(-1, length)
    keep1, keep2 = _puncture_masks(k, code)
    n1, n2 = int(keep1.sum()), int(keep2.sum())
    p1 = np.zeros((x.shape[0], k))
    p2 = np.zeros((x.shape[0], k))
    p1[:, keep1] = x[:, k:k + n1]
    p2[:, keep2] = x[:, k + n1:k + n1 + n2]
    t1 = x[:, k + n1 + n2:k + n1 + n2 + 6]
    t2 = x[:, k + n1 + n2 + 6:]
    dec = _turbo_iterate(np.ascontiguousarray(x[:, :k]), p1, p2,
                         np.ascontiguousarray(t1[:, 0::2]), np.ascontiguousarray(t1[:, 1::2]),
                         np.ascontiguousarray(t2[:, 0::2]), np.ascontiguousarray(t2[:, 1::2]),
                         turbo_interleaver(k), _RSC_NEXT, _RSC_PAR.astype(np.int64),
                         TURBO_ITERATIONS, _EXTRINSIC_SCALE)
    return dec.reshape(*lead, k)
