"""Pure-numpy versions of the compiled kernels (same signatures, see ``_kernels_numba``)."""

import numpy as np

NAME = "numpy"


def _b(v, x_thr, x_sat):
    return np.minimum(v * v * (1.0 / x_thr), x_sat)


def _ext_table(table, G):
    # ext[G + lag] = K(lag) for lag in [-G, G); padding spikes are mapped to lag < 0
    H = min(table.shape[0], G)
    ext = np.zeros(2 * G + 1)
    ext[G:G + H] = table[:H]
    return ext


def _gather(idx, t, ext, G):
    """K(t - idx) with idx == -1 treated as no spike. ``idx`` broadcasts against ``t``."""
    lag = t - np.where(idx < 0, G, idx)
    return ext[lag + G]


def branch_drives(spk, slots_row, table, G):
    ext = _ext_table(table, G)
    idx = spk[:, slots_row, :].reshape(spk.shape[0], -1)
    t = np.arange(G)
    return _gather(idx[:, :, None], t[None, None, :], ext, G).sum(axis=1)


def membrane(spk, slots, table, G, x_thr, x_sat):
    V = np.zeros((spk.shape[0], G))
    for row in slots:
        V += _b(branch_drives(spk, row, table, G), x_thr, x_sat)
    return V


def vmax_per_sample(spk, slots3, table, G, x_thr, x_sat, chunk=256):
    ext = _ext_table(table, G)
    N, m, k = slots3.shape
    t = np.arange(G)
    out = np.empty(N)
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        rows = np.arange(lo, hi)[:, None, None]
        V = np.zeros((hi - lo, G))
        for j in range(m):
            idx = spk[rows, slots3[lo:hi, j][:, :, None], np.arange(spk.shape[2])[None, None, :]]
            idx = idx.reshape(hi - lo, -1)
            drive = _gather(idx[:, :, None], t[None, None, :], ext, G).sum(axis=1)
            V += _b(drive, x_thr, x_sat)
        out[lo:hi] = V.max(axis=1)
    return out


def swap_update(V, spk, slots_row, pos, a_in, table, x_thr, x_sat):
    G = V.shape[1]
    ext = _ext_table(table, G)
    old = branch_drives(spk, slots_row, table, G)
    t = np.arange(G)[None, None, :]
    delta = _gather(spk[:, a_in, :][:, :, None], t, ext, G).sum(axis=1)
    delta -= _gather(spk[:, slots_row[pos], :][:, :, None], t, ext, G).sum(axis=1)
    V += _b(old + delta, x_thr, x_sat) - _b(old, x_thr, x_sat)


def psp_at(spk, pats, tmax, afferents, table):
    G = int(max(tmax.max(initial=0), spk.max(initial=0))) + 1
    ext = _ext_table(table, max(G, table.shape[0]))
    Gx = (ext.shape[0] - 1) // 2
    idx = spk[pats][:, afferents, :]  # (n, r, S)
    return _gather(idx, tmax[:, None, None], ext, Gx).sum(axis=2)


def drives_at(spk, pats, tmax, slots, table):
    m, k = slots.shape
    return psp_at(spk, pats, tmax, slots.reshape(-1), table).reshape(len(pats), m, k).sum(axis=2)


def linear_voltage(spk_p, w, table, G):
    s = spk_p.reshape(-1)
    ws = np.repeat(w, spk_p.shape[1])
    keep = s >= 0
    hist = np.bincount(s[keep], weights=ws[keep], minlength=G)[:G]
    return np.convolve(hist, table)[:G]


def linear_vmax(spk, w, table, G):
    P = spk.shape[0]
    vmax = np.empty(P)
    tmax = np.empty(P, dtype=np.int64)
    for p in range(P):
        V = linear_voltage(spk[p], w, table, G)
        t = int(np.argmax(V))
        vmax[p] = V[t]
        tmax[p] = t
    return vmax, tmax


def vmax_tmax(V):
    t = np.argmax(V, axis=1)
    return V[np.arange(V.shape[0]), t], t.astype(np.int64)


def lif_spikes(bits, decay, gain, threshold, reset):
    # the reset makes this recursion inherently sequential
    out = []
    state = reset
    for i, b in enumerate(np.asarray(bits, dtype=float).tolist()):
        state = state * decay + gain * b
        if state >= threshold:
            out.append(i)
            state = reset
    return np.asarray(out, dtype=np.int64)
