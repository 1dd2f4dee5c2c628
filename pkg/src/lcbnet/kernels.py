"""Dynamic-programming kernels: CTC forward/backward and word edit distance.

Each kernel has a loop implementation compiled with numba and a vectorised
numpy implementation. The module-level names ``ctc_forward_backward`` and
``edit_distance_table`` point at whichever backend ``_accel`` selected.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

NEG_INF = -np.inf


def extend_with_blanks(labels, blank):
    """``[a, b]`` -> ``[blank, a, blank, b, blank]``."""
    labels = np.asarray(labels, dtype=np.int64)
    ext = np.full(2 * labels.shape[0] + 1, blank, dtype=np.int64)
    ext[1::2] = labels
    return ext


def ctc_min_frames(labels):
    """Shortest input length that can emit ``labels`` (repeats need a blank between)."""
    labels = list(labels)
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


# ---------------------------------------------------------------------------
# CTC, numba path
# ---------------------------------------------------------------------------

@njit
def _lse2(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit
def _ctc_loops(log_probs, ext):
    T = log_probs.shape[0]
    S = ext.shape[0]
    la = np.full((T, S), -np.inf)
    lb = np.full((T, S), -np.inf)

    la[0, 0] = log_probs[0, ext[0]]
    if S > 1:
        la[0, 1] = log_probs[0, ext[1]]
    for t in range(1, T):
        for s in range(S):
            acc = la[t - 1, s]
            if s >= 1:
                acc = _lse2(acc, la[t - 1, s - 1])
            if s >= 2 and ext[s] != ext[0] and ext[s] != ext[s - 2]:
                acc = _lse2(acc, la[t - 1, s - 2])
            if acc != -np.inf:
                la[t, s] = acc + log_probs[t, ext[s]]

    lb[T - 1, S - 1] = 0.0
    if S > 1:
        lb[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        for s in range(S):
            acc = lb[t + 1, s] + log_probs[t + 1, ext[s]]
            if s + 1 < S:
                acc = _lse2(acc, lb[t + 1, s + 1] + log_probs[t + 1, ext[s + 1]])
            if s + 2 < S and ext[s + 2] != ext[0] and ext[s + 2] != ext[s]:
                acc = _lse2(acc, lb[t + 1, s + 2] + log_probs[t + 1, ext[s + 2]])
            lb[t, s] = acc

    log_like = la[T - 1, S - 1]
    if S > 1:
        log_like = _lse2(log_like, la[T - 1, S - 2])
    return la, lb, log_like


# ---------------------------------------------------------------------------
# CTC, numpy path (vectorised over the extended label axis)
# ---------------------------------------------------------------------------

def _ctc_numpy(log_probs, ext):
    T = log_probs.shape[0]
    S = ext.shape[0]
    blank = ext[0]
    skip = np.zeros(S, dtype=bool)
    if S > 2:
        skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])
    emit = log_probs[:, ext]  # (T, S)

    la = np.full((T, S), NEG_INF)
    lb = np.full((T, S), NEG_INF)
    la[0, : min(S, 2)] = emit[0, : min(S, 2)]
    shifted1 = np.full(S, NEG_INF)
    shifted2 = np.full(S, NEG_INF)
    with np.errstate(invalid="ignore"):
        for t in range(1, T):
            prev = la[t - 1]
            shifted1[1:] = prev[:-1]
            shifted2[:] = NEG_INF
            shifted2[2:] = np.where(skip[2:], prev[:-2], NEG_INF)
            la[t] = np.logaddexp(np.logaddexp(prev, shifted1), shifted2) + emit[t]

        # skip transitions seen from the source side: s -> s+2 allowed iff skip[s+2]
        skip_from = np.zeros(S, dtype=bool)
        skip_from[:-2] = skip[2:]
        lb[T - 1, S - 1] = 0.0
        if S > 1:
            lb[T - 1, S - 2] = 0.0
        for t in range(T - 2, -1, -1):
            nxt = lb[t + 1] + emit[t + 1]
            shifted1[:] = NEG_INF
            shifted1[:-1] = nxt[1:]
            shifted2[:] = NEG_INF
            shifted2[:-2] = np.where(skip_from[:-2], nxt[2:], NEG_INF)
            lb[t] = np.logaddexp(np.logaddexp(nxt, shifted1), shifted2)

    log_like = la[T - 1, S - 1]
    if S > 1:
        log_like = np.logaddexp(log_like, la[T - 1, S - 2])
    return la, lb, float(log_like)


def ctc_forward_backward_numba(log_probs, ext):
    la, lb, ll = _ctc_loops(np.ascontiguousarray(log_probs, dtype=np.float64),
                            np.ascontiguousarray(ext, dtype=np.int64))
    return la, lb, float(ll)


def ctc_forward_backward_numpy(log_probs, ext):
    return _ctc_numpy(np.asarray(log_probs, dtype=np.float64), np.asarray(ext, dtype=np.int64))


# ---------------------------------------------------------------------------
# Edit distance table
# ---------------------------------------------------------------------------

@njit
def _edit_loops(ref, hyp):
    n = ref.shape[0]
    m = hyp.shape[0]
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        d[i, 0] = i
        for j in range(1, m + 1):
            best = d[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            if d[i - 1, j] + 1 < best:
                best = d[i - 1, j] + 1
            if d[i, j - 1] + 1 < best:
                best = d[i, j - 1] + 1
            d[i, j] = best
    return d


def edit_distance_table_numba(ref, hyp):
    return _edit_loops(np.ascontiguousarray(ref, dtype=np.int64), np.ascontiguousarray(hyp, dtype=np.int64))


def edit_distance_table_numpy(ref, hyp):
    ref = np.asarray(ref, dtype=np.int64)
    hyp = np.asarray(hyp, dtype=np.int64)
    n, m = ref.shape[0], hyp.shape[0]
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    cols = np.arange(m + 1)
    d[0] = cols
    for i in range(1, n + 1):
        row = np.empty(m + 1, dtype=np.int64)
        row[0] = i
        row[1:] = np.minimum(d[i - 1, 1:] + 1, d[i - 1, :-1] + (hyp != ref[i - 1]))
        # insertions chain left to right: row[j] = min_k<=j row[k] + (j - k)
        d[i] = np.minimum.accumulate(row - cols) + cols
    return d


if USE_NUMBA:
    ctc_forward_backward = ctc_forward_backward_numba
    edit_distance_table = edit_distance_table_numba
else:
    ctc_forward_backward = ctc_forward_backward_numpy
    edit_distance_table = edit_distance_table_numpy
