"""Compiled inner loops. Signatures mirror ``_kernels_numpy``.

Conventions shared by both backends:

``spk``   int64 ``(P, d, S)`` spike grid indices, padded with -1
``table`` float64 ``(H,)`` kernel at lags ``0..H-1`` grid steps
``G``     number of grid points in a presentation
``slots`` int64 ``(m, k)`` afferent index per synaptic slot
"""

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True, inline="always")
def _b(v, inv_thr, x_sat):
    return min(v * v * inv_thr, x_sat)


@njit(cache=True)
def _add_afferent(drive, spk_pa, table, G, scale):
    H = table.shape[0]
    for q in range(spk_pa.shape[0]):
        s = spk_pa[q]
        if s < 0:
            break
        stop = G - s
        if stop > H:
            stop = H
        for lag in range(stop):
            drive[s + lag] += scale * table[lag]


@njit(cache=True)
def branch_drives(spk, slots_row, table, G):
    P = spk.shape[0]
    out = np.zeros((P, G))
    for p in range(P):
        for a in slots_row:
            _add_afferent(out[p], spk[p, a], table, G, 1.0)
    return out


@njit(cache=True)
def membrane(spk, slots, table, G, x_thr, x_sat):
    P = spk.shape[0]
    V = np.zeros((P, G))
    drive = np.zeros(G)
    for p in range(P):
        for j in range(slots.shape[0]):
            drive[:] = 0.0
            for a in slots[j]:
                _add_afferent(drive, spk[p, a], table, G, 1.0)
            for t in range(G):
                V[p, t] += _b(drive[t], 1.0 / x_thr, x_sat)
    return V


@njit(cache=True)
def vmax_per_sample(spk, slots3, table, G, x_thr, x_sat):
    """Peak voltage of pattern ``n`` under its own connection map ``slots3[n]``."""
    N = spk.shape[0]
    out = np.empty(N)
    V = np.zeros(G)
    drive = np.zeros(G)
    for n in range(N):
        V[:] = 0.0
        for j in range(slots3.shape[1]):
            drive[:] = 0.0
            for a in slots3[n, j]:
                _add_afferent(drive, spk[n, a], table, G, 1.0)
            for t in range(G):
                V[t] += _b(drive[t], 1.0 / x_thr, x_sat)
        out[n] = V.max()
    return out


@njit(cache=True, inline="always")
def _add_window(drive, spk, p, a, table, lo, hi, scale):
    # drive[t - lo] += scale * K(t - s) for t in [lo, hi)
    H = table.shape[0]
    for q in range(spk.shape[2]):
        s = spk[p, a, q]
        if s < 0:
            break
        start = max(s, lo)
        stop = min(s + H, hi)
        for t in range(start, stop):
            drive[t - lo] += scale * table[t - s]


@njit(cache=True)
def swap_update(V, spk, slots_row, pos, a_in, table, x_thr, x_sat):
    """In place: V += b(new branch drive) - b(old) after slot ``pos`` gets ``a_in``.

    Only the span touched by the spikes of the two swapped afferents changes.
    """
    P, G = V.shape
    H = table.shape[0]
    S = spk.shape[2]
    k = slots_row.shape[0]
    old = np.zeros(G)
    delta = np.zeros(G)
    a_out = slots_row[pos]
    inv = 1.0 / x_thr
    for p in range(P):
        lo = G
        hi = 0
        for q in range(S):
            s = spk[p, a_in, q]
            if s < 0:
                break
            lo = min(lo, s)
            hi = max(hi, s + H)
        for q in range(S):
            s = spk[p, a_out, q]
            if s < 0:
                break
            lo = min(lo, s)
            hi = max(hi, s + H)
        hi = min(hi, G)
        if lo >= hi:
            continue
        n = hi - lo
        old[:n] = 0.0
        delta[:n] = 0.0
        for r in range(k):
            _add_window(old, spk, p, slots_row[r], table, lo, hi, 1.0)
        _add_window(delta, spk, p, a_in, table, lo, hi, 1.0)
        _add_window(delta, spk, p, a_out, table, lo, hi, -1.0)
        Vp = V[p]
        for i in range(n):
            o = old[i]
            nw = o + delta[i]
            Vp[lo + i] += min(nw * nw * inv, x_sat) - min(o * o * inv, x_sat)


@njit(cache=True, inline="always")
def _psp(spk, p, a, t, table):
    H = table.shape[0]
    acc = 0.0
    for q in range(spk.shape[2]):
        s = spk[p, a, q]
        if s < 0:
            break
        lag = t - s
        if lag >= 0 and lag < H:
            acc += table[lag]
    return acc


@njit(cache=True)
def psp_at(spk, pats, tmax, afferents, table):
    """``out[n, r] = sum_f K(tmax[n] - t_f)`` over spikes of ``afferents[r]`` in pattern ``pats[n]``."""
    out = np.zeros((pats.shape[0], afferents.shape[0]))
    for n in range(pats.shape[0]):
        for r in range(afferents.shape[0]):
            out[n, r] = _psp(spk, pats[n], afferents[r], tmax[n], table)
    return out


@njit(cache=True)
def drives_at(spk, pats, tmax, slots, table):
    """``out[n, j]``: drive of branch ``j`` at ``tmax[n]`` for pattern ``pats[n]``."""
    m, k = slots.shape
    out = np.zeros((pats.shape[0], m))
    for n in range(pats.shape[0]):
        for j in range(m):
            acc = 0.0
            for r in range(k):
                acc += _psp(spk, pats[n], slots[j, r], tmax[n], table)
            out[n, j] = acc
    return out


@njit(cache=True)
def linear_voltage(spk_p, w, table, G):
    """Membrane trace of a linear-summation neuron for one pattern ``spk_p`` (d, S)."""
    V = np.zeros(G)
    for i in range(spk_p.shape[0]):
        if w[i] != 0.0:
            _add_afferent(V, spk_p[i], table, G, w[i])
    return V


@njit(cache=True)
def linear_vmax(spk, w, table, G):
    P = spk.shape[0]
    vmax = np.empty(P)
    tmax = np.empty(P, dtype=np.int64)
    for p in range(P):
        V = linear_voltage(spk[p], w, table, G)
        t = np.argmax(V)
        vmax[p] = V[t]
        tmax[p] = t
    return vmax, tmax


def vmax_tmax(V):
    t = np.argmax(V, axis=1)
    return V[np.arange(V.shape[0]), t], t.astype(np.int64)


@njit(cache=True)
def lif_spikes(bits, decay, gain, threshold, reset):
    """Sample indices at which a discrete leaky integrator driven by ``bits`` fires."""
    out = np.empty(bits.shape[0], dtype=np.int64)
    n = 0
    state = reset
    for i in range(bits.shape[0]):
        state = state * decay + gain * bits[i]
        if state >= threshold:
            out[n] = i
            n += 1
            state = reset
    return out[:n]
