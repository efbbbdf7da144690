"""Hot numeric kernels, each with a numba and a pure-numpy implementation.

The active implementation is picked once at import from :mod:`noisyfb._accel`.
Both families are importable side by side (``NUMPY_KERNELS`` / ``NUMBA_KERNELS``)
so the benchmark and the parity tests can compare them directly.

Logs are base 2 throughout; cells with zero mass contribute nothing.
"""

import numpy as np

from ._accel import HAVE_NUMBA, njit

LOG2E = 1.4426950408889634

# ---------------------------------------------------------------------------
# loop bodies (compiled by numba, or usable as slow references)
# ---------------------------------------------------------------------------


def _extend_loop(old, table, rowidx):
    n_old = old.shape[0]
    n_out = table.shape[1]
    out = np.empty(n_old * n_out)
    for j in range(n_old):
        pj = old[j]
        r = rowidx[j]
        base = j * n_out
        for s in range(n_out):
            out[base + s] = pj * table[r, s]
    return out


def _cmi3_loop(p):
    na, nb, nc = p.shape
    pac = np.zeros((na, nc))
    pbc = np.zeros((nb, nc))
    pc = np.zeros(nc)
    for a in range(na):
        for b in range(nb):
            for c in range(nc):
                v = p[a, b, c]
                pac[a, c] += v
                pbc[b, c] += v
                pc[c] += v
    acc = 0.0
    for a in range(na):
        for b in range(nb):
            for c in range(nc):
                v = p[a, b, c]
                if v > 0.0:
                    acc += v * np.log(v * pc[c] / (pac[a, c] * pbc[b, c]))
    return acc * LOG2E


def _cond_entropy2_loop(p):
    na, nc = p.shape
    pc = np.zeros(nc)
    for a in range(na):
        for c in range(nc):
            pc[c] += p[a, c]
    acc = 0.0
    for a in range(na):
        for c in range(nc):
            v = p[a, c]
            if v > 0.0:
                acc -= v * np.log(v / pc[c])
    return acc * LOG2E


def _grouped_cmi_loop(p, ia, ib, ic, na, nb, nc):
    pabc = np.zeros(na * nb * nc)
    pac = np.zeros(na * nc)
    pbc = np.zeros(nb * nc)
    pc = np.zeros(nc)
    for j in range(p.shape[0]):
        v = p[j]
        a = ia[j]
        b = ib[j]
        c = ic[j]
        pabc[(a * nb + b) * nc + c] += v
        pac[a * nc + c] += v
        pbc[b * nc + c] += v
        pc[c] += v
    acc = 0.0
    for a in range(na):
        for b in range(nb):
            for c in range(nc):
                v = pabc[(a * nb + b) * nc + c]
                if v > 0.0:
                    acc += v * np.log(v * pc[c] / (pac[a * nc + c] * pbc[b * nc + c]))
    return acc * LOG2E


def _weighted_product_loop(base, theta, idx):
    n_factors, n_cells = idx.shape
    out = base.copy()
    for k in range(n_factors):
        for j in range(n_cells):
            out[j] *= theta[idx[k, j]]
    return out


def _bcec_loop(payload, uniforms, alpha, p, max_rounds, alternating):
    """Run the signaling-bit retransmission protocol over one payload.

    Returns (decoded, n_decoded, uses_per_codeword, channel_uses, status) where
    status is 0 = finished, 1 = round cap hit, 2 = uniforms exhausted.
    """
    n_cw, width = payload.shape
    decoded = np.zeros((n_cw + 1, width), dtype=payload.dtype)
    uses = np.zeros(n_cw, dtype=np.int64)
    n_dec = 0
    t = 0
    n_u = uniforms.shape[0] // 2
    # encoder state
    sig = 0
    # decoder state
    expect = 0
    have_current = False
    erased_since = False
    status = 0
    k = 0
    while k < n_cw:
        if uses[k] >= max_rounds:
            status = 1
            break
        if t >= n_u:
            status = 2
            break
        fwd_ok = uniforms[2 * t] >= alpha
        fb_ok = uniforms[2 * t + 1] >= p
        uses[k] += 1
        t += 1
        if fwd_ok:
            if alternating:
                if sig == expect:
                    for b in range(width):
                        decoded[n_dec, b] = payload[k, b]
                    n_dec += 1
                    expect ^= 1
            else:
                accept = False
                if sig == 0 or not have_current:
                    accept = True
                elif erased_since:
                    # either a fresh codeword whose first copy was lost or another
                    # copy of the last one; only the contents can tell them apart
                    same = True
                    for b in range(width):
                        if decoded[n_dec - 1, b] != payload[k, b]:
                            same = False
                            break
                    accept = not same
                if accept:
                    for b in range(width):
                        decoded[n_dec, b] = payload[k, b]
                    n_dec += 1
                    have_current = True
                erased_since = False
        else:
            erased_since = True
        if fwd_ok and fb_ok:
            k += 1
            if alternating:
                sig ^= 1
            else:
                sig = 0
        elif not alternating:
            sig = 1
    return decoded[:n_cw], n_dec, uses, t, status


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------


def _xlog_ratio(num, den, weight):
    mask = weight > 0
    return float(np.sum(weight[mask] * np.log2(num[mask] / den[mask])))


def extend_np(old, table, rowidx):
    return (old[:, None] * table[rowidx]).ravel()


def cmi3_np(p):
    pac = p.sum(axis=1, keepdims=True)
    pbc = p.sum(axis=0, keepdims=True)
    pc = p.sum(axis=(0, 1), keepdims=True)
    mask = p > 0
    num = (p * pc)[mask]
    den = np.broadcast_to(pac * pbc, p.shape)[mask]
    return float(np.sum(p[mask] * np.log2(num / den)))


def cond_entropy2_np(p):
    pc = np.broadcast_to(p.sum(axis=0, keepdims=True), p.shape)
    mask = p > 0
    return float(-np.sum(p[mask] * np.log2(p[mask] / pc[mask])))


def grouped_cmi_np(p, ia, ib, ic, na, nb, nc):
    pabc = np.bincount((ia * nb + ib) * nc + ic, weights=p, minlength=na * nb * nc)
    return cmi3_np(pabc.reshape(na, nb, nc))


def weighted_product_np(base, theta, idx):
    return base * np.prod(theta[idx], axis=0)


def bcec_np(payload, uniforms, alpha, p, max_rounds, alternating):
    if not alternating:
        return _bcec_loop(payload, uniforms, alpha, p, max_rounds, alternating)
    n_cw, width = payload.shape
    u = uniforms[: 2 * (uniforms.shape[0] // 2)].reshape(-1, 2)
    fwd_ok = u[:, 0] >= alpha
    advance = fwd_ok & (u[:, 1] >= p)
    # codeword index on the air at each use
    cw = np.concatenate(([0], np.cumsum(advance)[:-1]))
    live = cw < n_cw
    cw, fwd_ok = cw[live], fwd_ok[live]
    uses = np.bincount(cw, minlength=n_cw).astype(np.int64)
    status = 0
    n_used = int(live.sum())
    if uses.size and uses.max() > max_rounds:
        status = 1
        first = int(np.argmax(uses > max_rounds))
        stop = int(np.searchsorted(cw, first)) + max_rounds
        cw, fwd_ok, n_used = cw[:stop], fwd_ok[:stop], stop
        uses = np.bincount(cw, minlength=n_cw).astype(np.int64)
    elif not (advance[live].sum() >= n_cw):
        status = 2
    sig = cw & 1
    got = sig[fwd_ok]
    accept = np.empty(got.shape, dtype=bool)
    if got.size:
        accept[0] = got[0] == 0
        accept[1:] = got[1:] != got[:-1]
    decoded = np.zeros_like(payload)
    rows = payload[cw[fwd_ok][accept]]
    decoded[: rows.shape[0]] = rows
    return decoded, rows.shape[0], uses, n_used, status


NUMPY_KERNELS = {
    "extend": extend_np,
    "cmi3": cmi3_np,
    "cond_entropy2": cond_entropy2_np,
    "grouped_cmi": grouped_cmi_np,
    "weighted_product": weighted_product_np,
    "bcec": bcec_np,
}

if HAVE_NUMBA:
    NUMBA_KERNELS = {
        "extend": njit(_extend_loop),
        "cmi3": njit(_cmi3_loop),
        "cond_entropy2": njit(_cond_entropy2_loop),
        "grouped_cmi": njit(_grouped_cmi_loop),
        "weighted_product": njit(_weighted_product_loop),
        "bcec": njit(_bcec_loop),
    }
    ACTIVE = NUMBA_KERNELS
else:
    NUMBA_KERNELS = {}
    ACTIVE = NUMPY_KERNELS

extend = ACTIVE["extend"]
cmi3 = ACTIVE["cmi3"]
cond_entropy2 = ACTIVE["cond_entropy2"]
grouped_cmi = ACTIVE["grouped_cmi"]
weighted_product = ACTIVE["weighted_product"]
bcec = ACTIVE["bcec"]
