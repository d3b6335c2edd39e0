"""Hot loops for collision counting, shared by the norm and extremizer engines.

Layout convention: a spectrum (a finite set of (s, c) keys with values, s the
frequency-sum numerator and c the cube-sum numerator) is stored grouped by s:

    svals   sorted distinct s values
    pos     dense lookup pos[s - smin] -> group index or -1
    gstart  start offset of each group in the flat arrays
    glen    group length
    c       cube-sum numerators, sorted within each group
    w / m   values (complex split into re/im, or integer multiplicities)

Convolving two spectra and reducing per total frequency sum S is then a loop
over split pairs (s1, S - s1).  Fill kernels write candidate C = c1 + c2 with
weights into a scratch buffer; the caller sorts (numpy's sort is the fastest
available here) and a scan kernel reduces equal-C runs.  All loops run in a
fixed order independent of any shard/chunk schedule, so results are
bit-reproducible.

The integer fast path packs (C << 4) | multiplicity into one int64 (valid
because per-element multiplicities are at most 8), sorts a single array, and
accumulates exactly in integers.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# group construction (numpy, not performance critical)
# ---------------------------------------------------------------------------


def build_pair_groups(ks: np.ndarray, amps=None):
    """Grouped pair spectrum of a mode set (ordered pairs, diag 1 / offdiag 2).

    With amps=None returns integer multiplicities (unit-amplitude case);
    otherwise complex pair values 2*a_i*a_j off-diagonal and a_i^2 on the
    diagonal.
    """
    ks = np.asarray(ks, dtype=np.int64)
    i, j = np.triu_indices(len(ks))
    s = ks[i] + ks[j]
    c = ks[i] ** 3 + ks[j] ** 3
    if amps is None:
        w = np.where(i == j, 1, 2).astype(np.int64)
        order = np.lexsort((c, s))
        return _group(s[order], c[order], w[order], None)
    amps = np.asarray(amps, dtype=complex)
    w = np.where(i == j, 1.0, 2.0) * amps[i] * amps[j]
    order = np.lexsort((c, s))
    return _group(s[order], c[order], None, w[order])


def build_mode_groups(ks: np.ndarray, amps=None):
    """Grouped one-fold spectrum: keys (k, k^3) with the given amplitudes."""
    ks = np.asarray(ks, dtype=np.int64)
    order = np.argsort(ks, kind="stable")
    s = ks[order]
    c = s**3
    if amps is None:
        return _group(s, c, np.ones(len(s), dtype=np.int64), None)
    amps = np.asarray(amps, dtype=complex)
    return _group(s, c, None, amps[order])


def build_product_groups(kL, aL, kN, aN, lam: int):
    """Grouped spectrum of u_L * u_N: keys (k1+k2, k1^3+k2^3), values
    a b / lambda^2, over all ordered cross pairs, consolidated."""
    kL = np.asarray(kL, dtype=np.int64)
    kN = np.asarray(kN, dtype=np.int64)
    s = (kL[:, None] + kN[None, :]).ravel()
    c = (kL[:, None] ** 3 + kN[None, :] ** 3).ravel()
    w = (np.asarray(aL, dtype=complex)[:, None] * np.asarray(aN, dtype=complex)[None, :]).ravel()
    w = w / float(lam) ** 2
    order = np.lexsort((c, s))
    s, c, w = s[order], c[order], w[order]
    # consolidate identical (s, c) keys
    new = np.empty(len(s), dtype=bool)
    new[0] = True
    new[1:] = (s[1:] != s[:-1]) | (c[1:] != c[:-1])
    idx = np.cumsum(new) - 1
    cs = c[new]
    ss = s[new]
    wre = np.bincount(idx, weights=w.real, minlength=new.sum())
    wim = np.bincount(idx, weights=w.imag, minlength=new.sum())
    return _group(ss, cs, None, wre + 1j * wim)


class GroupedSpectrum:
    __slots__ = ("svals", "pos", "smin", "gstart", "glen", "c", "m", "wre", "wim")

    def __init__(self, svals, pos, smin, gstart, glen, c, m, wre, wim):
        self.svals = svals
        self.pos = pos
        self.smin = smin
        self.gstart = gstart
        self.glen = glen
        self.c = c
        self.m = m
        self.wre = wre
        self.wim = wim

    @property
    def group_sizes(self):
        return self.glen

    def size_vector(self):
        """Dense per-s entry counts, indexed s - smin."""
        n = np.zeros(self.svals[-1] - self.smin + 1, dtype=np.int64)
        n[self.svals - self.smin] = self.glen
        return n


def _group(s, c, m, w) -> GroupedSpectrum:
    svals, start, counts = np.unique(s, return_index=True, return_counts=True)
    smin = int(svals[0])
    pos = np.full(int(svals[-1]) - smin + 1, -1, dtype=np.int64)
    pos[svals - smin] = np.arange(len(svals))
    if m is not None:
        return GroupedSpectrum(
            svals.astype(np.int64), pos, smin, start.astype(np.int64),
            counts.astype(np.int64), c, m, None, None,
        )
    return GroupedSpectrum(
        svals.astype(np.int64), pos, smin, start.astype(np.int64),
        counts.astype(np.int64), c, None,
        np.ascontiguousarray(w.real), np.ascontiguousarray(w.imag),
    )


def self_conv_insert_counts(g: GroupedSpectrum):
    """Per-S unordered-pair insert counts for conv(g, g); index S - 2*smin."""
    n = g.size_vector()
    full = np.convolve(n, n)
    diag = np.zeros(len(full), dtype=np.int64)
    diag[::2] = n
    return (full + diag) // 2


def cross_conv_insert_counts(ga: GroupedSpectrum, gb: GroupedSpectrum):
    """Per-S insert counts for conv(ga, gb); index S - (smin_a + smin_b)."""
    return np.convolve(ga.size_vector(), gb.size_vector())


# ---------------------------------------------------------------------------
# integer fast path (all-equal amplitudes): packed (C << 4) | weight
# ---------------------------------------------------------------------------


@njit(cache=True)
def fill_self_int(pos, smin, smax, gstart, glen, c, m, S, buf):
    cnt = 0
    lo = S - smax
    if lo < smin:
        lo = smin
    hi = S // 2
    for s1 in range(lo, hi + 1):
        g1 = pos[s1 - smin]
        if g1 < 0:
            continue
        g2 = pos[S - s1 - smin]
        if g2 < 0:
            continue
        a0 = gstart[g1]
        n1 = glen[g1]
        b0 = gstart[g2]
        n2 = glen[g2]
        if s1 < S - s1:
            for ia in range(a0, a0 + n1):
                ca = c[ia]
                wa2 = 2 * m[ia]
                for ib in range(b0, b0 + n2):
                    buf[cnt] = ((ca + c[ib]) << 4) | (wa2 * m[ib])
                    cnt += 1
        else:
            for ia in range(a0, a0 + n1):
                ca = c[ia]
                wa = m[ia]
                buf[cnt] = ((2 * ca) << 4) | (wa * wa)
                cnt += 1
                for ib in range(ia + 1, a0 + n1):
                    buf[cnt] = ((ca + c[ib]) << 4) | (2 * wa * m[ib])
                    cnt += 1
    return cnt


@njit(cache=True)
def fill_cross_int(posA, sminA, smaxA, gstartA, glenA, cA, mA,
                   posB, sminB, smaxB, gstartB, glenB, cB, mB, S, buf):
    cnt = 0
    lo = S - smaxB
    if lo < sminA:
        lo = sminA
    hi = S - sminB
    if hi > smaxA:
        hi = smaxA
    for s1 in range(lo, hi + 1):
        g1 = posA[s1 - sminA]
        if g1 < 0:
            continue
        g2 = posB[S - s1 - sminB]
        if g2 < 0:
            continue
        a0 = gstartA[g1]
        n1 = glenA[g1]
        b0 = gstartB[g2]
        n2 = glenB[g2]
        for ia in range(a0, a0 + n1):
            ca = cA[ia]
            wa = mA[ia]
            for ib in range(b0, b0 + n2):
                buf[cnt] = ((ca + cB[ib]) << 4) | (wa * mB[ib])
                cnt += 1
    return cnt


@njit(cache=True)
def scan_packed_int(buf, cnt):
    """Sum over distinct C of (sum of packed weights)^2; buf[:cnt] sorted."""
    if cnt == 0:
        return np.int64(0)
    total = np.int64(0)
    run_key = buf[0] >> 4
    run_w = np.int64(0)
    for i in range(cnt):
        key = buf[i] >> 4
        if key != run_key:
            total += run_w * run_w
            run_key = key
            run_w = np.int64(0)
        run_w += buf[i] & np.int64(15)
    total += run_w * run_w
    return total


# ---------------------------------------------------------------------------
# general complex path
# ---------------------------------------------------------------------------


@njit(cache=True)
def fill_self_gen(pos, smin, smax, gstart, glen, c, wre, wim, S, cbuf, rbuf, ibuf):
    cnt = 0
    lo = S - smax
    if lo < smin:
        lo = smin
    hi = S // 2
    for s1 in range(lo, hi + 1):
        g1 = pos[s1 - smin]
        if g1 < 0:
            continue
        g2 = pos[S - s1 - smin]
        if g2 < 0:
            continue
        a0 = gstart[g1]
        n1 = glen[g1]
        b0 = gstart[g2]
        n2 = glen[g2]
        if s1 < S - s1:
            for ia in range(a0, a0 + n1):
                ca = c[ia]
                ra = wre[ia]
                qa = wim[ia]
                for ib in range(b0, b0 + n2):
                    cbuf[cnt] = ca + c[ib]
                    rb = wre[ib]
                    qb = wim[ib]
                    rbuf[cnt] = 2.0 * (ra * rb - qa * qb)
                    ibuf[cnt] = 2.0 * (ra * qb + qa * rb)
                    cnt += 1
        else:
            for ia in range(a0, a0 + n1):
                ca = c[ia]
                ra = wre[ia]
                qa = wim[ia]
                cbuf[cnt] = 2 * ca
                rbuf[cnt] = ra * ra - qa * qa
                ibuf[cnt] = 2.0 * ra * qa
                cnt += 1
                for ib in range(ia + 1, a0 + n1):
                    cbuf[cnt] = ca + c[ib]
                    rb = wre[ib]
                    qb = wim[ib]
                    rbuf[cnt] = 2.0 * (ra * rb - qa * qb)
                    ibuf[cnt] = 2.0 * (ra * qb + qa * rb)
                    cnt += 1
    return cnt


@njit(cache=True)
def fill_cross_gen(posA, sminA, smaxA, gstartA, glenA, cA, reA, imA,
                   posB, sminB, smaxB, gstartB, glenB, cB, reB, imB,
                   S, cbuf, rbuf, ibuf):
    cnt = 0
    lo = S - smaxB
    if lo < sminA:
        lo = sminA
    hi = S - sminB
    if hi > smaxA:
        hi = smaxA
    for s1 in range(lo, hi + 1):
        g1 = posA[s1 - sminA]
        if g1 < 0:
            continue
        g2 = posB[S - s1 - sminB]
        if g2 < 0:
            continue
        a0 = gstartA[g1]
        n1 = glenA[g1]
        b0 = gstartB[g2]
        n2 = glenB[g2]
        for ia in range(a0, a0 + n1):
            ca = cA[ia]
            ra = reA[ia]
            qa = imA[ia]
            for ib in range(b0, b0 + n2):
                cbuf[cnt] = ca + cB[ib]
                rb = reB[ib]
                qb = imB[ib]
                rbuf[cnt] = ra * rb - qa * qb
                ibuf[cnt] = ra * qb + qa * rb
                cnt += 1
    return cnt


@njit(cache=True)
def scan_sorted_gen(cbuf, rbuf, ibuf, order, cnt):
    """Sum over distinct C of |run sum of weights|^2, runs taken in `order`."""
    if cnt == 0:
        return 0.0
    total = 0.0
    k0 = cbuf[order[0]]
    sre = 0.0
    sim = 0.0
    for i in range(cnt):
        o = order[i]
        key = cbuf[o]
        if key != k0:
            total += sre * sre + sim * sim
            k0 = key
            sre = 0.0
            sim = 0.0
        sre += rbuf[o]
        sim += ibuf[o]
    total += sre * sre + sim * sim
    return total


@njit(cache=True)
def consolidate_sorted_gen(cbuf, rbuf, ibuf, order, cnt, out_c, out_re, out_im):
    """Merge equal-C runs; returns number of distinct keys written."""
    if cnt == 0:
        return 0
    n = 0
    k0 = cbuf[order[0]]
    sre = 0.0
    sim = 0.0
    for i in range(cnt):
        o = order[i]
        key = cbuf[o]
        if key != k0:
            out_c[n] = k0
            out_re[n] = sre
            out_im[n] = sim
            n += 1
            k0 = key
            sre = 0.0
            sim = 0.0
        sre += rbuf[o]
        sim += ibuf[o]
    out_c[n] = k0
    out_re[n] = sre
    out_im[n] = sim
    return n + 1


# ---------------------------------------------------------------------------
# bilinear semi-analytic window reduction
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _interp_cubic(tab, tau0, dtau, x):
    """Catmull-Rom interpolation on a uniform table; 0 outside."""
    pos = (x - tau0) / dtau
    i = int(np.floor(pos))
    if i < 1 or i > len(tab) - 3:
        return 0.0
    f = pos - i
    p0 = tab[i - 1]
    p1 = tab[i]
    p2 = tab[i + 1]
    p3 = tab[i + 2]
    return p1 + 0.5 * f * (
        p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0))
    )


@njit(cache=True)
def window_quad_sum(om, qre, qim, inv_lam3, tab, tau0, dtau, tcut):
    """sum_{i,j} Q_i conj(Q_j) F((om_j - om_i) * inv_lam3) over one S group.

    om must be sorted ascending; F is read from the uniform table and assumed
    negligible beyond tcut, so only |d tau| <= tcut windows are visited.
    F is even, so off-diagonal pairs contribute twice their real part.
    """
    n = len(om)
    total = 0.0
    f0 = _interp_cubic(tab, tau0, dtau, 0.0)
    for i in range(n):
        total += (qre[i] * qre[i] + qim[i] * qim[i]) * f0
        j = i + 1
        while j < n:
            d = (om[j] - om[i]) * inv_lam3
            if d > tcut:
                break
            fv = _interp_cubic(tab, tau0, dtau, d)
            total += 2.0 * (qre[i] * qre[j] + qim[i] * qim[j]) * fv
            j += 1
    return total


# ---------------------------------------------------------------------------
# resonance set counting (counterexample module)
# ---------------------------------------------------------------------------


@njit(cache=True)
def mset_histogram(N, xi4, W, hist):
    """Histogram over alpha of |xi2 (xi1-xi3)(xi1+xi3-xi2)| binned by W.

    Counts triples satisfying |xi1|<=N, |xi1-xi2|<=N, |xi3-xi2+xi4|<=N,
    |xi3|<=N; the bin index is floor(P / W) (alpha - 1).  Returns the total
    count; bins beyond len(hist)-1 are clamped onto the last slot, which
    callers size generously (P <= 64 N^3 bounds the range).
    """
    total = np.int64(0)
    nb = len(hist)
    for x1 in range(-N, N + 1):
        lo2 = x1 - N
        hi2 = x1 + N
        for x3 in range(-N, N + 1):
            lo2b = x3 + xi4 - N
            hi2b = x3 + xi4 + N
            l2 = lo2 if lo2 > lo2b else lo2b
            h2 = hi2 if hi2 < hi2b else hi2b
            for x2 in range(l2, h2 + 1):
                P = x2 * (x1 - x3) * (x1 + x3 - x2)
                if P < 0:
                    P = -P
                b = int(np.floor(P / W))
                if b >= nb:
                    b = nb - 1
                hist[b] += 1
                total += 1
    return total


@njit(cache=True)
def witness_xi1_counts(N, xi4, alpha, W):
    """The constructive lower-bound mechanism on the witness box.

    For xi3 in [N/16, N/8) and xi2 in [N/4, 3N/4), count xi1 values putting
    the triple in the alpha bin (with all four indicator constraints);
    returns (total count, minimum xi1-count over the box).
    """
    lo3 = N // 16
    hi3 = N // 8
    lo2 = N // 4
    hi2 = (3 * N) // 4
    total = np.int64(0)
    minc = np.int64(-1)
    for x3 in range(lo3, hi3):
        for x2 in range(lo2, hi2):
            cnt = np.int64(0)
            for x1 in range(-N, N + 1):
                if abs(x1 - x2) > N:
                    continue
                if abs(x3 - x2 + xi4) > N:
                    continue
                P = x2 * (x1 - x3) * (x1 + x3 - x2)
                if P < 0:
                    P = -P
                b = int(np.floor(P / W))
                if b == alpha - 1:
                    cnt += 1
            total += cnt
            if minc < 0 or cnt < minc:
                minc = cnt
    return total, minc


# ---------------------------------------------------------------------------
# packed-key maps (extremizer gradients)
# ---------------------------------------------------------------------------


@njit(cache=True)
def packed_binsearch(keys, x):
    lo = 0
    hi = len(keys)
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    if lo < len(keys) and keys[lo] == x:
        return lo
    return -1


@njit(cache=True)
def gradient_pairing(keys_hi, re_hi, im_hi, s_lo, c_lo, re_lo, im_lo,
                     mu, mu3, coff, shift):
    """sum over low-order entries of B_hi(s+mu, c+mu^3) * conj(B_lo(s, c)).

    keys_hi are packed ((s << shift) | (c + coff)) and sorted; s_lo is
    already expressed in the same shifted s units.  Shifted keys falling
    outside the packable range cannot be present in B_hi and are skipped.
    """
    gre = 0.0
    gim = 0.0
    top = np.int64(1) << shift
    for i in range(len(s_lo)):
        lowbits = c_lo[i] + mu3 + coff
        if lowbits < 0 or lowbits >= top:
            continue
        shi = s_lo[i] + mu
        if shi < 0:
            continue
        key = (shi << shift) | lowbits
        j = packed_binsearch(keys_hi, key)
        if j < 0:
            continue
        # B_hi * conj(B_lo)
        gre += re_hi[j] * re_lo[i] + im_hi[j] * im_lo[i]
        gim += im_hi[j] * re_lo[i] - re_hi[j] * im_lo[i]
    return gre, gim
