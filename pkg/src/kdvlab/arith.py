"""Weyl sums, Farey arcs, totients, divisors, and the major-arc kernels.

Phases of cubic Weyl sums need care: n^3 t in naive float64 loses everything
once n^3 ~ 1e16/t.  Every monomial phase here is reduced mod 1 exactly by
writing the float coefficient as an integer ratio (num / 2^e) and doing the
modular arithmetic on Python integers before rounding once at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .bumps import EtaProfile, EtaTilde, PhiTransform, PlateauBump, default_eta, phi_arc_bump
from .lattice import DyadicBlock, TorusSpec

WEYL_LENGTH_GUARD = 10**7
FAREY_GUARD = 1 << 20

# Two-sided arc radius c/q^2.  With c = 1/4 the arcs around distinct
# fractions a/q, a'/q' with q, q' in [Q, 2Q) are provably disjoint:
# their gap is at least 1/(q q') while the radii sum to
# (c/q^2 + c/q'^2) <= c (q'/q + q/q') / (q q') < 2.5 c / (q q').
ARC_RADIUS_COEFF = 0.25


def frac_mod1(k: int, t: float) -> float:
    """Exact fractional part of k * t for integer k and float t.

    t is decomposed exactly as num/den with den a power of two, so
    (k * num) mod den is computed on arbitrary-precision integers.
    """
    if t == 0.0 or k == 0:
        return 0.0
    num, den = float(t).as_integer_ratio()
    return ((k * num) % den) / den


def weyl_sum(t: float, a2: float, a1: float, a0: float, p: int) -> complex:
    """sum_{n=0}^{p} exp(2 pi i (t n^3 + a2 n^2 + a1 n + a0)).

    Each monomial phase is reduced mod 1 exactly before the complex
    exponentials are accumulated with compensated summation.
    """
    if p < 0 or p > WEYL_LENGTH_GUARD:
        raise ValueError(f"p must be in [0, {WEYL_LENGTH_GUARD}]")
    re: List[float] = []
    im: List[float] = []
    two_pi = 2.0 * math.pi
    for n in range(p + 1):
        theta = frac_mod1(n * n * n, t) + frac_mod1(n * n, a2) + frac_mod1(n, a1) + a0
        re.append(math.cos(two_pi * theta))
        im.append(math.sin(two_pi * theta))
    return complex(math.fsum(re), math.fsum(im))


# ---------------------------------------------------------------------------
# Farey pairs and major arcs
# ---------------------------------------------------------------------------


@dataclass
class MajorArcSystem:
    """All reduced fractions a/q with q in [Q, 2Q), plus the arc bump.

    The disjointness check uses two-sided arcs of radius 1/(4 q^2) (see
    ARC_RADIUS_COEFF); the bump Phi itself scales the arc bump phi onto
    [a/q, a/q + 1/q^2] exactly as its defining formula does.
    """

    Q: int
    pairs: List[Tuple[int, int]]
    bump: PlateauBump = field(default_factory=phi_arc_bump)
    transform: Optional[PhiTransform] = None

    def __post_init__(self):
        if self.transform is None:
            self.transform = PhiTransform(bump=self.bump)

    def arcs_disjoint(self) -> bool:
        """Constructive check in exact rational arithmetic."""
        fracs = [(Fraction(a, q), q) for a, q in self.pairs]
        fracs.sort()
        c = Fraction(1, 4)
        for (f1, q1), (f2, q2) in zip(fracs, fracs[1:]):
            if f1 + c / q1**2 >= f2 - c / q2**2:
                return False
        return True

    def count(self) -> int:
        return len(self.pairs)


def farey_pairs(Q: int) -> MajorArcSystem:
    """All coprime (a, q) with q in [Q, 2Q), 1 <= a < q, sorted by a/q."""
    Q = int(Q)
    if Q < 1 or Q > FAREY_GUARD:
        raise ValueError(f"Q must be in [1, {FAREY_GUARD}]")
    if Q & (Q - 1):
        raise ValueError("Q must be dyadic")
    pairs = [
        (a, q)
        for q in range(Q, 2 * Q)
        for a in range(1, q)
        if math.gcd(a, q) == 1
    ]
    pairs.sort(key=lambda aq: Fraction(aq[0], aq[1]))
    return MajorArcSystem(Q=Q, pairs=pairs)


def totients_upto(n: int) -> np.ndarray:
    """Euler phi for 0..n by the classic in-place sieve."""
    phi = np.arange(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if phi[p] == p:  # p prime
            phi[p::p] -= phi[p::p] // p
    return phi


def totients_by_factorization(n: int) -> np.ndarray:
    """Second, independent totient tabulation via smallest prime factors."""
    spf = np.zeros(n + 1, dtype=np.int64)
    for p in range(2, n + 1):
        if spf[p] == 0:
            spf[p::p] = np.where(spf[p::p] == 0, p, spf[p::p])
    phi = np.ones(n + 1, dtype=np.int64)
    phi[0] = 0
    for q in range(2, n + 1):
        m, out = q, 1
        while m > 1:
            p = int(spf[m])
            e = 0
            while m % p == 0:
                m //= p
                e += 1
            out *= (p - 1) * p ** (e - 1)
        phi[q] = out
    return phi


def totient_sum(Q: int) -> float:
    """sum_{q in [Q, 2Q)} phi(q)/q^2, each term a single rounding, fsum total."""
    Q = int(Q)
    if Q < 1 or Q > FAREY_GUARD:
        raise ValueError(f"Q must be in [1, {FAREY_GUARD}]")
    phi = totients_upto(2 * Q - 1)
    return math.fsum(int(phi[q]) / (q * q) for q in range(Q, 2 * Q))


# ---------------------------------------------------------------------------
# divisor counting on the full int64 domain
# ---------------------------------------------------------------------------


def _is_prime_u64(n: int) -> bool:
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    # deterministic witness set for n < 2^64
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _brent_rho(n: int) -> int:
    if n % 2 == 0:
        return 2
    for c in range(1, 50):
        x = y = 2
        d = 1
        while d == 1:
            x = (x * x + c) % n
            y = (y * y + c) % n
            y = (y * y + c) % n
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d
    raise ArithmeticError(f"rho failed on {n}")  # practically unreachable


def factorize(n: int) -> Dict[int, int]:
    """Prime factorization of n >= 1 (trial division + Miller-Rabin + rho)."""
    n = int(n)
    out: Dict[int, int] = {}
    for p in (2, 3, 5, 7, 11, 13):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if _is_prime_u64(m):
            out[m] = out.get(m, 0) + 1
            continue
        d = _brent_rho(m)
        stack.extend([d, m // d])
    return out


def divisor_count(gamma: int, Q: int) -> int:
    """Number of positive divisors of |gamma| strictly below Q."""
    gamma = int(gamma)
    if gamma == 0:
        raise ValueError("gamma must be nonzero")
    fac = factorize(abs(gamma))
    divisors = [1]
    for p, e in fac.items():
        divisors = [d * p**k for d in divisors for k in range(e + 1)]
    return sum(1 for d in divisors if d < Q)


# ---------------------------------------------------------------------------
# the arc bump Phi and its Fourier coefficients
# ---------------------------------------------------------------------------


def phi_bump_eval(t, sys: MajorArcSystem) -> np.ndarray:
    """Phi(t) = sum over arcs of phi((t - a/q) q^2), t taken mod 1."""
    t = np.mod(np.asarray(t, dtype=float), 1.0)
    out = np.zeros_like(t)
    for a, q in sys.pairs:
        out += sys.bump((t - a / q) * q * q)
        # the 1-periodic extension matters only for t slightly below 1
        out += sys.bump((t + 1.0 - a / q) * q * q)
    return out


def phi_fourier(gamma: int, sys: MajorArcSystem) -> complex:
    """F_[0,1] Phi(gamma) by the closed form
    sum_{(a,q)} q^{-2} exp(-2 pi i a gamma / q) F phi(gamma / q^2);
    the rational phases are reduced exactly."""
    gamma = int(gamma)
    total = 0.0 + 0.0j
    tr = sys.transform
    for a, q in sys.pairs:
        phase = -2.0 * math.pi * ((a * gamma) % q) / q
        total += complex(math.cos(phase), math.sin(phase)) * complex(tr(gamma / q**2)) / q**2
    return total


def phi_fourier_zero(sys: MajorArcSystem) -> float:
    """F Phi(0) = (sum over arcs of q^{-2}) * integral(phi), exactly the
    totient sum times the bump mass."""
    s = math.fsum(1.0 / (q * q) for _, q in sys.pairs)
    return s * sys.bump.integral()


# ---------------------------------------------------------------------------
# Weyl bound ratio sweeps
# ---------------------------------------------------------------------------


@dataclass
class WeylRatioReport:
    p: int
    eps: float
    max_ratio: float
    argmax: Tuple[float, int, int]  # (t, a, q)
    samples: int


def weyl_bound_ratio(
    p: int,
    eps: float = 0.05,
    q_scales: Optional[Sequence[int]] = None,
    arcs_per_scale: int = 8,
    offsets: Sequence[float] = (0.0, 0.5, -0.5, 0.9, -0.9),
) -> WeylRatioReport:
    """max |S| / (p^{1+eps} (1/p + 1/q + q/p^3)^{1/4}) over sampled arcs.

    For each dyadic Q up to p, a deterministic stride picks arcs_per_scale
    fractions a/q with q ~ Q; t runs over a/q plus the listed offsets in
    units of 1/q^2 (all within the arc).
    """
    if q_scales is None:
        q_scales = []
        Q = 2
        while Q <= p:
            q_scales.append(Q)
            Q *= 2
    best = 0.0
    arg = (0.0, 0, 1)
    n_samples = 0
    for Q in q_scales:
        sys = farey_pairs(Q)
        stride = max(1, len(sys.pairs) // arcs_per_scale)
        for a, q in sys.pairs[::stride]:
            for off in offsets:
                t = a / q + off / (q * q)
                s = abs(weyl_sum(t, 0.0, 0.0, 0.0, p))
                bound = p ** (1.0 + eps) * (1.0 / p + 1.0 / q + q / p**3) ** 0.25
                n_samples += 1
                if s / bound > best:
                    best = s / bound
                    arg = (t, a, q)
    return WeylRatioReport(p=p, eps=eps, max_ratio=best, argmax=arg, samples=n_samples)


# ---------------------------------------------------------------------------
# the kernels K and K1 with the sup bound
# ---------------------------------------------------------------------------


def q_scale_for(L: int, N: int) -> int:
    """The dyadic arc scale: Q = N when N <= L^2, else Q = L^2.

    Clamped below at 2: the scale-1 fraction set {a : 1 <= a < 1} is empty,
    so the smallest usable dyadic scale is 2.
    """
    return max(2, N if N <= L * L else L * L)


@dataclass(frozen=True)
class KernelSpec:
    """The product kernel of two dyadic annuli on T_lambda.

    K(t, x) = eta~(t) * D_L(t, x) * conj(D_N(t, x)) where D_M is the flat
    flow of the annulus at scale M, so its frequency support is exactly the
    product of the two annuli.
    """

    L: DyadicBlock
    N: DyadicBlock
    torus: TorusSpec


@dataclass
class KernelSupReport:
    sup_K: float
    sup_K1: float
    normalized_ratio: float
    Q: int
    eps: float
    grid: Tuple[int, int]


def kernel_K1_sup(
    spec: KernelSpec,
    sys: Optional[MajorArcSystem] = None,
    grid: Tuple[int, int] = (1 << 15, 256),
    eps: float = 0.05,
    eta: Optional[EtaProfile] = None,
) -> KernelSupReport:
    """Grid sup of |K1| = |Phi/F Phi(0)| |K| and the ratio against
    lambda^2 N^{3/4+eps} L^{3/4+eps}.

    The double frequency sum factorizes into a product of two single-block
    Dirichlet-type flows, so the grid evaluation is two mode sums per time
    row.  The t grid must resolve cubic phases up to (2N)^3; the guard
    lambda*N <= 512 keeps that honest at the default grid.
    """
    lam = spec.torus.lam
    L = spec.L.scale
    N = spec.N.scale
    if lam * N > 512:
        raise ValueError("kernel evaluation guarded at lambda * N <= 512")
    if eta is None:
        eta = default_eta()
    if sys is None:
        sys = farey_pairs(q_scale_for(L, N))
    T, X = grid
    t = np.linspace(-1.0, 1.0, T, endpoint=False)
    x = lam * np.arange(X) / X
    kL = spec.L.modes(spec.torus)
    kN = spec.N.modes(spec.torus)
    lam3 = float(lam) ** 3
    tilde = EtaTilde(eta)
    weights = tilde(t)
    phi_t = phi_bump_eval(t, sys)
    norm0 = phi_fourier_zero(sys)
    sup_K = 0.0
    sup_K1 = 0.0
    chunk = max(1, (1 << 21) // max(len(kL) + len(kN), 1))
    exL = np.exp(2j * np.pi * np.outer(kL / lam, x))
    exN = np.exp(2j * np.pi * np.outer(kN / lam, x))
    for c0 in range(0, T, chunk):
        tc = t[c0 : c0 + chunk]
        pL = np.exp(2j * np.pi * np.outer(tc, kL.astype(float) ** 3 / lam3))
        pN = np.exp(2j * np.pi * np.outer(tc, kN.astype(float) ** 3 / lam3))
        absK = np.abs(pL @ exL) * np.abs(pN @ exN) * np.abs(weights[c0 : c0 + chunk])[:, None]
        sup_K = max(sup_K, float(np.max(absK)))
        sup_K1 = max(sup_K1, float(np.max(absK * (phi_t[c0 : c0 + chunk] / norm0)[:, None])))
    denom = lam**2 * N ** (0.75 + eps) * L ** (0.75 + eps)
    return KernelSupReport(
        sup_K=sup_K,
        sup_K1=sup_K1,
        normalized_ratio=sup_K1 / denom,
        Q=sys.Q,
        eps=eps,
        grid=grid,
    )
