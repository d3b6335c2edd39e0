"""Gradient ascent for Strichartz ratios on the unit coefficient sphere.

The objective at even p is F(a) = ||u||_p^p = sum over (frequency sum,
cube sum) keys of |B_m|^2 with m = p/2 and B_m the m-fold coefficient
convolution.  F is a degree-p real polynomial in (Re a, Im a); its Wirtinger
gradient dF/d conj(a_mu) is m * sum over B_{m-1} entries of
B_m(s + mu, c + mu^3) conj(B_{m-1}(s, c)), an adjoint pairing of the
(m-1)-fold spectrum against the m-fold one.  For p >= 10 the exact count is
infeasible and a common-random-numbers sampled objective takes its place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .lattice import CoeffVector, TorusSpec
from .norms import NormResult, lp_exact_torus, lp_sampled

GRADIENT_SUPPORT_GUARD = 400


@dataclass(frozen=True)
class AscentConfig:
    restarts: int = 4
    max_iters: int = 60
    step_init: float = 1.0
    tol: float = 1e-8
    seed: int = 0
    max_backtracks: int = 30

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


# ---------------------------------------------------------------------------
# consolidated m-fold spectra as packed sorted maps
# ---------------------------------------------------------------------------


class _PackedMap:
    """Sorted packed (s, c) -> complex map with int64 keys.

    key = ((s - smin) << shift) | (c - cmin); shift wide enough for the
    c range, so packed order is lexicographic in (s, c).
    """

    __slots__ = ("keys", "re", "im", "smin", "cmin", "shift", "s", "c")

    def __init__(self, s, c, re, im):
        self.s = s
        self.c = c
        self.smin = int(s.min())
        self.cmin = int(c.min())
        span = int(c.max()) - self.cmin
        self.shift = max(1, int(span).bit_length() + 1)
        self.keys = ((s - self.smin).astype(np.int64) << self.shift) | (c - self.cmin)
        self.re = re
        self.im = im

    def sum_sq(self) -> float:
        return float(np.sum(self.re**2 + self.im**2))


def _mode_map(u: CoeffVector) -> _PackedMap:
    ks = u.support()
    amps = u.amplitudes()
    return _PackedMap(ks, ks**3, np.ascontiguousarray(amps.real), np.ascontiguousarray(amps.imag))


def _conv_consolidate(ga, gb=None) -> _PackedMap:
    """conv(ga, gb) (or the self convolution) consolidated per (S, C)."""
    if gb is None:
        counts = kernels.self_conv_insert_counts(ga)
        sbase = 2 * int(ga.svals[0])
    else:
        counts = kernels.cross_conv_insert_counts(ga, gb)
        sbase = int(ga.svals[0]) + int(gb.svals[0])
    m = int(counts.max()) + 1
    cbuf = np.empty(m, dtype=np.int64)
    rbuf = np.empty(m, dtype=np.float64)
    ibuf = np.empty(m, dtype=np.float64)
    oc = np.empty(m, dtype=np.int64)
    ore = np.empty(m, dtype=np.float64)
    oim = np.empty(m, dtype=np.float64)
    S_out: List[np.ndarray] = []
    C_out: List[np.ndarray] = []
    R_out: List[np.ndarray] = []
    I_out: List[np.ndarray] = []
    for slot in range(len(counts)):
        if counts[slot] == 0:
            continue
        S = sbase + int(slot)
        if gb is None:
            cnt = kernels.fill_self_gen(
                ga.pos, int(ga.svals[0]), int(ga.svals[-1]), ga.gstart, ga.glen,
                ga.c, ga.wre, ga.wim, S, cbuf, rbuf, ibuf,
            )
        else:
            cnt = kernels.fill_cross_gen(
                ga.pos, int(ga.svals[0]), int(ga.svals[-1]), ga.gstart, ga.glen,
                ga.c, ga.wre, ga.wim,
                gb.pos, int(gb.svals[0]), int(gb.svals[-1]), gb.gstart, gb.glen,
                gb.c, gb.wre, gb.wim,
                S, cbuf, rbuf, ibuf,
            )
        order = np.argsort(cbuf[:cnt], kind="stable")
        n = kernels.consolidate_sorted_gen(cbuf, rbuf, ibuf, order, cnt, oc, ore, oim)
        S_out.append(np.full(n, S, dtype=np.int64))
        C_out.append(oc[:n].copy())
        R_out.append(ore[:n].copy())
        I_out.append(oim[:n].copy())
    return _PackedMap(
        np.concatenate(S_out), np.concatenate(C_out),
        np.concatenate(R_out), np.concatenate(I_out),
    )


def _pairs_map(u: CoeffVector) -> _PackedMap:
    """Consolidated two-fold spectrum (all antipodal pairs share key (0,0))."""
    ks = u.support()
    amps = u.amplitudes()
    i, j = np.triu_indices(len(ks))
    s = ks[i] + ks[j]
    c = ks[i] ** 3 + ks[j] ** 3
    w = np.where(i == j, 1.0, 2.0) * amps[i] * amps[j]
    order = np.lexsort((c, s))
    s, c, w = s[order], c[order], w[order]
    new = np.empty(len(s), dtype=bool)
    new[0] = True
    new[1:] = (s[1:] != s[:-1]) | (c[1:] != c[:-1])
    idx = np.cumsum(new) - 1
    re = np.bincount(idx, weights=w.real)
    im = np.bincount(idx, weights=w.imag)
    return _PackedMap(s[new], c[new], re, im)


def objective_lp(u: CoeffVector, p: int) -> float:
    """||u||_p^p by exact counting (p in {4, 6, 8}), as a plain float."""
    return lp_exact_torus(u, p).pth_power()


def objective_l8(a: CoeffVector) -> float:
    return objective_lp(a, 8)


def gradient_lp(u: CoeffVector, p: int, modes: Optional[Sequence[int]] = None) -> CoeffVector:
    """Wirtinger gradient dF/d conj(a_mu) of F = ||u||_p^p, p in {4, 6, 8}.

    By default the gradient is returned on the support of u; `modes` widens
    it (the pairing is valid at any frequency, found keys or not).  The
    real-coordinate gradient is (2 Re G, 2 Im G); validated against central
    finite differences in the tests.
    """
    if p not in (4, 6, 8):
        raise ValueError("exact gradients exist for p in {4, 6, 8}")
    if len(u) > GRADIENT_SUPPORT_GUARD:
        raise ValueError(f"gradient guarded at support <= {GRADIENT_SUPPORT_GUARD}")
    m = p // 2
    ks = u.support()
    amps = u.amplitudes()
    gp = kernels.build_pair_groups(ks, amps)
    if m == 2:
        hi = _pairs_map(u)
        lo = _mode_map(u)
    elif m == 3:
        gm = kernels.build_mode_groups(ks, amps)
        hi = _conv_consolidate(gp, gm)
        lo = _pairs_map(u)
    else:
        gm = kernels.build_mode_groups(ks, amps)
        hi = _conv_consolidate(gp)  # self convolution: the four-fold spectrum
        lo = _conv_consolidate(gp, gm)
    if modes is None:
        modes = [int(k) for k in ks]
    s_shifted = (lo.s - hi.smin).astype(np.int64)
    out: Dict[int, complex] = {}
    for mu in modes:
        mu = int(mu)
        gre, gim = kernels.gradient_pairing(
            hi.keys, hi.re, hi.im,
            s_shifted, lo.c, lo.re, lo.im,
            mu, mu**3, -hi.cmin, hi.shift,
        )
        out[mu] = m * complex(gre, gim)
    return CoeffVector(u.torus, out)


def gradient_l8(a: CoeffVector) -> CoeffVector:
    return gradient_lp(a, 8)


# ---------------------------------------------------------------------------
# sampled objective and gradient (p >= 10)
# ---------------------------------------------------------------------------


def _sampled_objective_gradient(
    ks: np.ndarray, a: np.ndarray, p: int, t_samples: int, shifts: int, seed: int,
    want_gradient: bool,
):
    """Mean of |u|^p over T^2 and its Wirtinger gradient, common random
    numbers fixed by `seed` so the surrogate surface is smooth in a."""
    kmax = int(np.max(np.abs(ks)))
    G = 1
    while G <= p * kmax:
        G *= 2
    rng = np.random.default_rng(seed)
    cubes = ks.astype(float) ** 3
    total = 0.0
    grad = np.zeros(len(ks), dtype=complex) if want_gradient else None
    n_rows = 0
    for sh in range(shifts):
        off = rng.random()
        t = (np.arange(t_samples) + off) / t_samples
        chunk = max(1, (1 << 21) // G)
        for c0 in range(0, t_samples, chunk):
            tc = t[c0 : c0 + chunk]
            phases = np.exp(2j * np.pi * np.outer(tc, cubes)) * a[None, :]
            spec = np.zeros((len(tc), G), dtype=complex)
            spec[:, ks % G] = phases
            vals = np.fft.fft(spec, axis=1)
            absv = np.abs(vals)
            total += float(np.sum(absv**p)) / G
            if want_gradient:
                # d/d conj(a_mu) mean |u|^p = (p/2) mean |u|^{p-2} u conj(e_mu)
                w = absv ** (p - 2) * vals
                coef = np.fft.ifft(w, axis=1)  # mean over x of w e^{-2pi i k x/G}
                contrib = coef[:, ks % G] * np.exp(-2j * np.pi * np.outer(tc, cubes))
                grad += (p / 2.0) * np.sum(contrib, axis=0)
            n_rows += len(tc)
    total /= n_rows
    if want_gradient:
        grad /= n_rows
        return total, grad
    return total, None


# ---------------------------------------------------------------------------
# projected ascent
# ---------------------------------------------------------------------------


@dataclass
class AscentResult:
    best: CoeffVector
    best_value: float  # C(N, p) estimate: ||u||_p at unit coefficient mass
    best_objective: float  # its p-th power
    iters: int
    restarts: int
    seed_index: int
    histories: List[List[float]] = field(default_factory=list)
    std_error: float = 0.0


def _seed_vectors(N: int, restarts: int, rng: np.random.Generator) -> List[np.ndarray]:
    M = 2 * N + 1
    seeds = []
    flat = np.ones(M, dtype=complex) / math.sqrt(M)
    seeds.append(flat)
    single = np.zeros(M, dtype=complex)
    single[-1] = 1.0  # the mode at +N
    seeds.append(single)
    for _ in range(max(0, restarts - 2)):
        z = rng.standard_normal(M) + 1j * rng.standard_normal(M)
        seeds.append(z / np.linalg.norm(z))
    return seeds[:restarts]


def ascend(N: int, p: int, config: AscentConfig, t_samples: int = 512) -> AscentResult:
    """Projected gradient ascent of ||u||_p over unit-mass data on [-N, N].

    p in {4, 6, 8} uses exact counting; p in {10, ..., 16} a sampled
    objective with common random numbers.  The flat block and the single
    mode always seed the first two restarts, so the reported constant never
    falls below those baselines.  Ties between restarts break toward the
    higher objective, then the lower seed index.
    """
    if p in (4, 6, 8):
        exact = True
    elif p in (10, 12, 14, 16):
        exact = False
    else:
        raise ValueError("p must be one of {4, 6, 8, 10, 12, 14, 16}")
    torus = TorusSpec(1)
    ks = np.arange(-N, N + 1, dtype=np.int64)
    rng = np.random.default_rng(config.seed)
    crn_seed = int(rng.integers(1 << 62))

    def vec_to_coeffs(a: np.ndarray) -> CoeffVector:
        return CoeffVector(torus, {int(k): complex(v) for k, v in zip(ks, a) if v != 0})

    def f_and_g(a: np.ndarray, need_grad=True):
        if exact:
            u = vec_to_coeffs(a)
            val = objective_lp(u, p)
            if not need_grad:
                return val, None
            g = gradient_lp(u, p, modes=[int(k) for k in ks])
            garr = np.array([g.entries.get(int(k), 0.0) for k in ks], dtype=complex)
            return val, garr
        val, g = _sampled_objective_gradient(
            ks, a, p, t_samples, 8, crn_seed, need_grad
        )
        return val, g

    best_val = -np.inf
    best_a = None
    best_idx = 0
    iters_used = 0
    histories: List[List[float]] = []
    for idx, a in enumerate(_seed_vectors(N, config.restarts, rng)):
        a = a / np.linalg.norm(a)
        val, g = f_and_g(a)
        history: List[float] = [val]
        for it in range(config.max_iters):
            iters_used += 1
            step = config.step_init
            improved = False
            for _ in range(config.max_backtracks):
                cand = a + step * g
                cand = cand / np.linalg.norm(cand)
                cval, _ = f_and_g(cand, need_grad=False)
                if cval > val:
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
            rel = (cval - val) / max(val, 1e-300)
            a = cand
            val, g = f_and_g(a)
            history.append(val)
            if rel < config.tol:
                break
        histories.append(history)
        if val > best_val + 0.0:
            best_val = val
            best_a = a.copy()
            best_idx = idx
    u_best = vec_to_coeffs(best_a)
    std_error = 0.0
    if not exact:
        # unbiased re-evaluation of the winner with fresh randomness
        res = lp_sampled(u_best, p, t_samples=2 * t_samples, seed=crn_seed + 1)
        best_val = res.pth_power()
        std_error = res.std_error
    return AscentResult(
        best=u_best,
        best_value=best_val ** (1.0 / p),
        best_objective=best_val,
        iters=iters_used,
        restarts=config.restarts,
        seed_index=best_idx,
        histories=histories,
        std_error=std_error,
    )


@dataclass
class ExponentFit:
    p: int
    exponent: float
    exponent_stderr: float
    intercept: float
    rows: List[Tuple[int, float, float]]  # (N, C(N,p), std_error)


def exponent_fit(
    p: int, N_list: Sequence[int], config: Optional[AscentConfig] = None,
    t_samples: int = 512,
) -> ExponentFit:
    """Log-log fit of the best-found C(N, p) against N.

    The confidence band combines the sampling errors of each C(N, p) with
    the ordinary-least-squares slope variance.
    """
    if config is None:
        config = AscentConfig(restarts=3, max_iters=25, seed=7)
    rows = []
    for N in N_list:
        res = ascend(N, p, config, t_samples=t_samples)
        rows.append((N, res.best_value, res.std_error))
    x = np.log(np.array([r[0] for r in rows], dtype=float))
    y = np.log(np.array([r[1] for r in rows], dtype=float))
    w = np.array([r[2] / r[1] if r[1] > 0 else 0.0 for r in rows])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    n = len(x)
    dof = max(n - 2, 1)
    sxx = float(np.sum((x - x.mean()) ** 2))
    var_resid = float(np.sum(resid**2)) / dof
    var_meas = float(np.mean(w**2)) / sxx if sxx > 0 else 0.0
    stderr = math.sqrt(var_resid / sxx + var_meas) if sxx > 0 else 0.0
    return ExponentFit(
        p=p, exponent=float(slope), exponent_stderr=stderr,
        intercept=float(intercept), rows=rows,
    )
