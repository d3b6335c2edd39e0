"""Frequency lattices on T_lambda, coefficient vectors, and the Airy flow.

Conventions (fixed once, used everywhere):

* The torus T_lambda = R/(lambda Z) has integer period lambda >= 1, so the
  frequency lattice Z/lambda is represented exactly by integer numerators k,
  with frequency value xi = k/lambda.
* Synthesis uses the counting measure (d xi)_lambda = lambda^{-1} sum, i.e.
  f(x) = lambda^{-1} sum_k a_k exp(2 pi i (k/lambda) x), so the L^2 mass of f
  over [0, lambda) equals lambda^{-1} sum |a_k|^2.
* The linear flow multiplies the mode at xi by exp(2 pi i xi^3 t).
* A dyadic annulus at scale N means N <= |xi| < 2N, both signs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Tuple

import numpy as np

# Largest |k| such that sums of eight cubes k^3 stay inside signed 64-bit
# integers (8 * FREQ_GUARD^3 < 2^63).
FREQ_GUARD = (1 << 20) - 1


class FrequencyOverflowError(ValueError):
    """Raised when a frequency numerator exceeds the 64-bit cube-sum guard."""


def check_frequency(k: int) -> int:
    k = int(k)
    if abs(k) > FREQ_GUARD:
        raise FrequencyOverflowError(
            f"|k|={abs(k)} exceeds the guard {FREQ_GUARD}; "
            "eight-fold cube sums would overflow 64-bit integers"
        )
    return k


@dataclass(frozen=True)
class TorusSpec:
    """The torus T_lambda with integer period lam >= 1 (lam=1 recovers T)."""

    lam: int = 1

    def __post_init__(self):
        if not isinstance(self.lam, (int, np.integer)) or self.lam < 1:
            raise ValueError(f"period must be a positive integer, got {self.lam!r}")

    def frequency(self, k: int) -> float:
        return k / self.lam


@dataclass(frozen=True)
class SpaceTimePoint:
    """A point (t, x) with x reduced into [0, lambda)."""

    t: float
    x: float

    @classmethod
    def reduced(cls, t: float, x: float, torus: TorusSpec) -> "SpaceTimePoint":
        return cls(float(t), float(x) % torus.lam)


@dataclass(frozen=True)
class DyadicBlock:
    """Frequency annulus {xi : N <= |xi| < 2N}, both signs, N a power of two."""

    scale: int

    def __post_init__(self):
        n = int(self.scale)
        if n < 1 or (n & (n - 1)) != 0:
            raise ValueError(f"dyadic scale must be a power of two, got {self.scale}")

    def contains(self, k: int, torus: TorusSpec) -> bool:
        # N <= |k/lam| < 2N  <=>  N*lam <= |k| < 2*N*lam, exactly in integers.
        return self.scale * torus.lam <= abs(int(k)) < 2 * self.scale * torus.lam

    def modes(self, torus: TorusSpec) -> np.ndarray:
        lo = self.scale * torus.lam
        hi = 2 * self.scale * torus.lam
        pos = np.arange(lo, hi, dtype=np.int64)
        return np.concatenate([-pos[::-1], pos])


@dataclass
class CoeffVector:
    """Finitely supported complex coefficients a_k on the lattice Z/lambda.

    Zero amplitudes are pruned so the support is exactly the key set.  The
    L^2 mass under (d xi)_lambda is lambda^{-1} sum |a_k|^2.
    """

    torus: TorusSpec
    entries: Dict[int, complex] = field(default_factory=dict)

    def __post_init__(self):
        cleaned: Dict[int, complex] = {}
        for k, a in self.entries.items():
            a = complex(a)
            if a != 0:
                cleaned[check_frequency(k)] = a
        self.entries = cleaned

    # -- basic views -------------------------------------------------------
    def support(self) -> np.ndarray:
        return np.array(sorted(self.entries), dtype=np.int64)

    def amplitudes(self) -> np.ndarray:
        return np.array([self.entries[k] for k in sorted(self.entries)], dtype=complex)

    def l2_mass(self) -> float:
        """||f||_{L^2[0,lambda)}^2 = lambda^{-1} sum |a_k|^2, exact from entries."""
        return float(sum(abs(a) ** 2 for a in self.entries.values()) / self.torus.lam)

    def __len__(self) -> int:
        return len(self.entries)

    def scaled(self, c: complex) -> "CoeffVector":
        return CoeffVector(self.torus, {k: c * a for k, a in self.entries.items()})

    # -- serialization (the one wire format shared by all tools) ------------
    def to_json_dict(self) -> dict:
        return {
            "lambda": self.torus.lam,
            "entries": [
                {"k": int(k), "re": float(a.real), "im": float(a.imag)}
                for k, a in sorted(self.entries.items())
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "CoeffVector":
        torus = TorusSpec(int(d["lambda"]))
        entries = {int(r["k"]): complex(float(r["re"]), float(r["im"])) for r in d["entries"]}
        return cls(torus, entries)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json(cls, s: str) -> "CoeffVector":
        return cls.from_json_dict(json.loads(s))


@dataclass
class PairSpectrum:
    """Map (k_i + k_j, k_i^3 + k_j^3) -> sum of a_i a_j over ordered pairs.

    Keys are integer numerators: the frequency-sum key is in units 1/lambda
    and the cube-sum key in units 1/lambda^3.  This is the counting substrate
    for every exact even-p norm: the key multiset of u^2's spectrum.
    """

    torus: TorusSpec
    entries: Dict[Tuple[int, int], complex]


def airy_phase(k: int, torus: TorusSpec, p: SpaceTimePoint) -> complex:
    """exp(2 pi i (xi^3 t + xi x)) with xi = k/lambda; modulus 1 up to rounding."""
    k = check_frequency(k)
    xi = k / torus.lam
    return complex(np.exp(2j * np.pi * (xi**3 * p.t + xi * p.x)))


def evolve(u0: CoeffVector, t: float) -> Callable[[np.ndarray], np.ndarray]:
    """Evaluator x -> lambda^{-1} sum_k a_k exp(2 pi i (xi^3 t + xi x)).

    The returned closure is vectorized over x.  The L^2_x mass is invariant
    in t because the flow only rotates the phases of the coefficients.
    """
    lam = u0.torus.lam
    ks = u0.support()
    if len(ks) == 0:
        return lambda x: np.zeros_like(np.asarray(x, dtype=float), dtype=complex)
    xi = ks / lam
    amps = u0.amplitudes() * np.exp(2j * np.pi * xi**3 * t)

    def u(x):
        x = np.asarray(x, dtype=float)
        return (np.exp(2j * np.pi * np.multiply.outer(x, xi)) @ amps) / lam

    return u


def pair_spectrum(u: CoeffVector) -> PairSpectrum:
    """Accumulate a_i a_j over ordered pairs into (sum, cube-sum) keys.

    Ordered pairs (i, j) and (j, i) both contribute, so an off-diagonal
    unordered pair lands with weight 2 a_i a_j; the total number of distinct
    keys is at most M(M+1)/2.  For keys with nonzero frequency sum the
    preimage pair is unique (pair rigidity); all antipodal pairs collapse
    onto the key (0, 0).
    """
    if len(u) < 1:
        raise ValueError("pair_spectrum requires a nonempty support")
    ks = [check_frequency(k) for k in sorted(u.entries)]
    out: Dict[Tuple[int, int], complex] = {}
    for i, ki in enumerate(ks):
        ai = u.entries[ki]
        key = (2 * ki, 2 * ki**3)
        out[key] = out.get(key, 0.0) + ai * ai
        for kj in ks[i + 1 :]:
            key = (ki + kj, ki**3 + kj**3)
            out[key] = out.get(key, 0.0) + 2 * ai * u.entries[kj]
    return PairSpectrum(u.torus, out)


def cubic_identity_check(xi1: int, xi2: int, xi3: int, xi4: int) -> bool:
    """Exact integer check of the four-frequency cubic rearrangement.

    Left side: xi1^3 - (xi1-xi2)^3 + (xi3-xi2+xi4)^3 - xi3^3.
    Right side: xi4^3 + 3 xi4 (xi3(xi3-2 xi2+xi4) + xi2(xi2-xi4))
                + 3 xi2 (xi1-xi3)(xi1+xi3-xi2).
    """
    xi1, xi2, xi3, xi4 = int(xi1), int(xi2), int(xi3), int(xi4)
    lhs = xi1**3 - (xi1 - xi2) ** 3 + (xi3 - xi2 + xi4) ** 3 - xi3**3
    rhs = (
        xi4**3
        + 3 * xi4 * (xi3 * (xi3 - 2 * xi2 + xi4) + xi2 * (xi2 - xi4))
        + 3 * xi2 * (xi1 - xi3) * (xi1 + xi3 - xi2)
    )
    return lhs == rhs


def resonance_roots(tau: float, xi: float) -> Tuple[complex, complex]:
    """Roots (alpha, beta) in xi1 of tau - 4 pi^2 (xi1^3 - (xi1-xi)^3) = 0.

    The cubic terms cancel, leaving the quadratic
        tau - 4 pi^2 (...) = -12 pi^2 xi (xi1 - alpha)(xi1 - beta),
    whose roots satisfy alpha + beta = xi and alpha*beta = xi^2/3 -
    tau/(12 pi^2 xi).  Returned with |alpha| >= |beta|; beta is derived as
    xi - alpha so the root-sum identity holds in the arithmetic used.
    """
    if xi == 0:
        raise ValueError("resonance roots are undefined at xi = 0")
    s = xi / 2.0
    prod = xi * xi / 3.0 - tau / (12.0 * np.pi**2 * xi)
    disc = complex(s * s - prod)
    d = np.sqrt(disc)
    r1 = s + d
    r2 = s - d
    alpha = r1 if abs(r1) >= abs(r2) else r2
    beta = complex(xi) - alpha
    return complex(alpha), complex(beta)


def resonance_residual(tau: float, xi: float, xi1: float) -> float:
    """|tau - 4 pi^2 (xi1^3-(xi1-xi)^3) + 12 pi^2 xi (xi1-alpha)(xi1-beta)|."""
    alpha, beta = resonance_roots(tau, xi)
    lhs = tau - 4 * np.pi**2 * (xi1**3 - (xi1 - xi) ** 3)
    rhs = -12 * np.pi**2 * xi * (xi1 - alpha) * (xi1 - beta)
    return abs(lhs - rhs)


def project_mean_zero(u: CoeffVector) -> CoeffVector:
    """Drop the zero-frequency entry; all others unchanged.  Idempotent."""
    return CoeffVector(u.torus, {k: a for k, a in u.entries.items() if k != 0})


def flat_block(block: DyadicBlock, torus: TorusSpec, unit_mass: bool = False) -> CoeffVector:
    """Equal amplitudes on a dyadic annulus.

    With unit_mass=True the common amplitude is chosen so the (d xi)_lambda
    mass is exactly 1; otherwise all amplitudes are 1.
    """
    ks = block.modes(torus)
    amp = 1.0
    if unit_mass:
        amp = float(np.sqrt(torus.lam / len(ks)))
    return CoeffVector(torus, {int(k): amp for k in ks})


def random_block(
    block: DyadicBlock, torus: TorusSpec, rng: np.random.Generator, unit_mass: bool = True
) -> CoeffVector:
    """Complex Gaussian amplitudes on the annulus, normalized to unit mass."""
    ks = block.modes(torus)
    z = rng.standard_normal(len(ks)) + 1j * rng.standard_normal(len(ks))
    if unit_mass:
        z = z * np.sqrt(torus.lam / np.sum(np.abs(z) ** 2))
    return CoeffVector(torus, {int(k): complex(a) for k, a in zip(ks, z)})


def block_of(u: CoeffVector) -> DyadicBlock:
    """The dyadic annulus containing supp(u), or ValueError if there is none."""
    ks = u.support()
    if len(ks) == 0:
        raise ValueError("empty support has no dyadic block")
    amin = int(np.min(np.abs(ks)))
    amax = int(np.max(np.abs(ks)))
    lam = u.torus.lam
    n = 1
    while 2 * n * lam <= amin:
        n *= 2
    block = DyadicBlock(n)
    if not (n * lam <= amin and amax < 2 * n * lam):
        raise ValueError(
            f"support with |k| in [{amin}, {amax}] does not fit a dyadic annulus "
            f"on T_{lam}"
        )
    return block
