"""Rescaling to the large torus, the smoothing multiplier, and the energy.

The rescaling u0 -> lambda^{-2/3} u0(x/lambda) maps data on T to data on
T_lambda; on the frequency side the integer index k is unchanged (the
frequency value becomes k/lambda) and the amplitude picks up lambda^{1/3},
which gives the exact L^2 law ||u0^lambda||_{L^2} = lambda^{-1/6} ||u0||.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .lattice import CoeffVector, TorusSpec

HAMILTONIAN_SUPPORT_GUARD = 200


def rescale(u: CoeffVector, lam: int) -> CoeffVector:
    """Data of lambda^{-2/3} u(x / lambda) on T_lambda, from data on T."""
    if u.torus.lam != 1:
        raise ValueError("rescale starts from data on the unit torus")
    if lam < 1:
        raise ValueError("lambda must be a positive integer")
    factor = float(lam) ** (1.0 / 3.0)
    return CoeffVector(TorusSpec(lam), {k: factor * a for k, a in u.entries.items()})


@dataclass(frozen=True)
class IMultiplier:
    """Smooth symbol m with m(r) = 1 for r <= 1 and r^{s-1} for r >= 2.

    On (1, 2) the blend is geometric, m(r) = r^{(s-1) w(r-1)} with w the
    cubic smoothstep; this keeps 0 < m <= 1, monotone nonincreasing, and
    matches both endpoints with one continuous derivative.  N sets the
    frequency scale at which damping turns on; it need not be dyadic (the
    smallness sweep chooses it from a power law in lambda).
    """

    N: float
    s: float

    def __post_init__(self):
        if not (0.5 < self.s < 1.0):
            raise ValueError("the smoothing exponent s must lie in (1/2, 1)")
        if self.N <= 0:
            raise ValueError("N must be positive")

    def symbol(self, r) -> np.ndarray:
        r = np.abs(np.asarray(r, dtype=float))
        out = np.ones_like(r)
        high = r >= 2.0
        out[high] = r[high] ** (self.s - 1.0)
        mid = (r > 1.0) & ~high
        u = r[mid] - 1.0
        w = 3 * u**2 - 2 * u**3
        out[mid] = r[mid] ** ((self.s - 1.0) * w)
        return out

    def __call__(self, xi) -> np.ndarray:
        return self.symbol(np.asarray(xi, dtype=float) / self.N)


def apply_I(u: CoeffVector, mult: IMultiplier) -> CoeffVector:
    """Pointwise frequency multiplier: a_k -> m(xi / N) a_k."""
    lam = u.torus.lam
    return CoeffVector(
        u.torus,
        {k: complex(mult(k / lam)) * a for k, a in u.entries.items()},
    )


def sobolev_norm(u: CoeffVector, s: float) -> float:
    """||u||_{H^s} = (lambda^{-1} sum <k/lambda>^{2s} |a_k|^2)^{1/2}."""
    lam = u.torus.lam
    total = math.fsum(
        (1.0 + (k / lam) ** 2) ** s * abs(a) ** 2 for k, a in u.entries.items()
    )
    return math.sqrt(total / lam)


def derivative(u: CoeffVector) -> CoeffVector:
    """d/dx on the Fourier side: a_k -> 2 pi i (k/lambda) a_k."""
    lam = u.torus.lam
    return CoeffVector(
        u.torus, {k: 2j * math.pi * (k / lam) * a for k, a in u.entries.items()}
    )


def _require_real(u: CoeffVector, tol: float = 1e-12):
    scale = max((abs(a) for a in u.entries.values()), default=0.0)
    for k, a in u.entries.items():
        b = u.entries.get(-k, 0.0)
        if abs(np.conj(a) - b) > tol * max(scale, 1.0):
            raise ValueError("hamiltonian requires real data (conjugate-symmetric coefficients)")


def _dense(u: CoeffVector) -> Tuple[np.ndarray, int]:
    ks = u.support()
    lo = int(ks.min())
    hi = int(ks.max())
    arr = np.zeros(hi - lo + 1, dtype=complex)
    for k, a in u.entries.items():
        arr[k - lo] = a
    return arr, lo


def quintic_integral(u: CoeffVector) -> float:
    """int_{T_lambda} u^5 dx, exactly the zero mode of the 5-fold convolution
    times lambda^{-4}."""
    if len(u) == 0:
        return 0.0
    arr, lo = _dense(u)
    c2 = np.convolve(arr, arr)
    c4 = np.convolve(c2, c2)
    c5 = np.convolve(c4, arr)
    zero_index = -5 * lo
    val = c5[zero_index] if 0 <= zero_index < len(c5) else 0.0
    return float(np.real(val)) / u.torus.lam**4


def hamiltonian(u: CoeffVector) -> float:
    """H(u) = (8 pi^2)^{-1} int (du/dx)^2 - (1/20) int u^5 on T_lambda.

    The kinetic term is Parseval-exact; the quintic term is the five-fold
    coefficient convolution at frequency zero.
    """
    if len(u) > HAMILTONIAN_SUPPORT_GUARD:
        raise ValueError(f"hamiltonian guarded at support <= {HAMILTONIAN_SUPPORT_GUARD}")
    _require_real(u)
    lam = u.torus.lam
    kinetic = math.fsum(
        (k / lam) ** 2 * abs(a) ** 2 for k, a in u.entries.items()
    ) / (2.0 * lam)
    return kinetic - quintic_integral(u) / 20.0


@dataclass
class SmallnessRow:
    lam: int
    N: float
    hamiltonian_value: float
    kinetic_proxy: float  # ||I d/dx u0^lambda||_{L^2}^2
    ratio: float


@dataclass
class SmallnessReport:
    rows: List[SmallnessRow]
    s: float
    kinetic_decreasing: bool


def smallness_check(
    u0: CoeffVector, s: float, lambdas: Sequence[int] = tuple(2**j for j in range(9))
) -> SmallnessReport:
    """Track H(I u0^lambda) against ||I d_x u0^lambda||_2^2 along the scaling.

    N is taken as lambda^{(1/6+s)/(1-s)} / log(2 + lambda), a strict
    little-o of the critical power law, so both quantities should decay;
    the report carries the per-lambda values and their ratio.
    """
    if not (0.5 < s < 1.0):
        raise ValueError("s must lie in (1/2, 1)")
    rows = []
    for lam in lambdas:
        ul = rescale(u0, int(lam))
        N = lam ** ((1.0 / 6.0 + s) / (1.0 - s)) / math.log(2.0 + lam)
        mult = IMultiplier(N=max(N, 1e-9), s=s)
        iu = apply_I(ul, mult)
        h = hamiltonian(iu)
        kin = apply_I(derivative(ul), mult).l2_mass()
        rows.append(
            SmallnessRow(
                lam=int(lam), N=N, hamiltonian_value=h, kinetic_proxy=kin,
                ratio=h / kin if kin > 0 else math.inf,
            )
        )
    kins = [r.kinetic_proxy for r in rows]
    decreasing = all(b <= a * (1 + 1e-12) for a, b in zip(kins, kins[1:]))
    return SmallnessReport(rows=rows, s=s, kinetic_decreasing=decreasing)


def five_tuple_identity_check(
    taus: Sequence[float], xis: Sequence[int]
) -> Tuple[float, float]:
    """Residual of the five-frequency resonance identity and its scale.

    Under sum(tau_j) = 0 and sum(xi_j) = 0 the quantity
    sum_j (tau_j - 4 pi^2 xi_j^3) equals -4 pi^2 sum xi_j^3; the identity
    says it is -12 pi^2 xi1 xi4 xi5 up to lower order.  Returns
    (|{-4 pi^2 sum xi^3} + 12 pi^2 xi1 xi4 xi5|, N1^2 N) with
    N1 = max(|xi1|, |xi4|) and N = |xi5|; reported, not asserted, since the
    identity is asymptotic.
    """
    taus = [float(t) for t in taus]
    xis = [int(x) for x in xis]
    if len(taus) != 5 or len(xis) != 5:
        raise ValueError("exactly five tau's and five xi's are required")
    tsum = math.fsum(taus)
    scale_t = max((abs(t) for t in taus), default=0.0)
    if abs(tsum) > 1e-9 * max(scale_t, 1.0):
        raise ValueError("the tau's must sum to zero")
    if sum(xis) != 0:
        raise ValueError("the xi's must sum to zero")
    cube_sum = sum(x**3 for x in xis)
    residual = 4 * math.pi**2 * abs(-cube_sum + 3 * xis[0] * xis[3] * xis[4])
    n1 = max(abs(xis[0]), abs(xis[3]))
    scale = n1**2 * abs(xis[4])
    return residual, float(scale)
