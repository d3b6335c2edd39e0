"""Mollified plateau bumps and their tabulated Fourier transforms.

Two bumps are used throughout:

* eta: the time cutoff, equal to 1 on [-1/2, 1/2] and supported on [-1, 1].
  Realized as the indicator of [-3/4, 3/4] convolved with a standard C-infty
  mollifier of radius 1/4, which honors both the plateau and the support
  exactly.
* phi: the major-arc bump, equal to 1 on [1/100, 2/100] and supported inside
  [0, 1] (actual support [0, 3/100]).  Realized as the indicator of
  [0.5/100, 2.5/100] convolved with a mollifier of radius 0.5/100.

Transforms are tabulated once on a fine grid by sampling and FFT (for a
smooth compactly supported function this is spectrally accurate) and read
through cubic splines.  Tables can be cached to a small binary file whose
format is: magic 'KDVT', u32 version, f64 tolerance, f64 grid step,
u64 count, count raw little-endian f64 values.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

_CACHE_MAGIC = b"KDVT"
_CACHE_VERSION = 1

# Tolerance actually achieved by the FFT tabulation (verified by quadrature
# spot checks in the test suite); recorded in cache files and manifests.
TABLE_TOL = 1e-10


def _mollifier_cdf_grid(n: int = 1 << 15):
    """CDF of the normalized bump exp(-1/(1-u^2)) on [-1, 1], trapezoid rule."""
    u = np.linspace(-1.0, 1.0, n + 1)
    rho = np.zeros_like(u)
    inner = np.abs(u) < 1.0
    rho[inner] = np.exp(-1.0 / (1.0 - u[inner] ** 2))
    h = 2.0 / n
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * h * (rho[1:] + rho[:-1]))])
    cdf /= cdf[-1]
    return u, cdf


_CDF_SPLINE: Optional[CubicSpline] = None


def mollifier_cdf(x) -> np.ndarray:
    """P(x) = (integral of the mollifier up to x), clipped to [0, 1]."""
    global _CDF_SPLINE
    if _CDF_SPLINE is None:
        _CDF_SPLINE = CubicSpline(*_mollifier_cdf_grid())
    x = np.asarray(x, dtype=float)
    out = np.clip(_CDF_SPLINE(np.clip(x, -1.0, 1.0)), 0.0, 1.0)
    return np.where(x <= -1.0, 0.0, np.where(x >= 1.0, 1.0, out))


@dataclass(frozen=True)
class PlateauBump:
    """Indicator of [lo, hi] convolved with a mollifier of radius r.

    Equals 1 on [lo+r, hi-r], vanishes outside [lo-r, hi+r], takes values in
    [0, 1], and is smooth.
    """

    lo: float
    hi: float
    r: float

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return mollifier_cdf((t - self.lo) / self.r) - mollifier_cdf((t - self.hi) / self.r)

    @property
    def support(self):
        return (self.lo - self.r, self.hi + self.r)

    @property
    def plateau(self):
        return (self.lo + self.r, self.hi - self.r)

    @property
    def center(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def integral(self) -> float:
        """Exact: convolution preserves total mass, so it is just hi - lo."""
        return self.hi - self.lo


def fft_transform_table(
    f: Callable[[np.ndarray], np.ndarray],
    power: int = 1,
    tau_max: float = 160.0,
    rate: int = 512,
    span: float = 1024.0,
    center: float = 0.0,
):
    """Tabulate F(f^power)(tau) = int f(t)^power exp(-2 pi i tau (t-center)) dt.

    f^power must be smooth and supported well inside [center-span/2,
    center+span/2]; sampling at `rate` points per unit and taking one FFT is
    then exact up to aliasing, which is superpolynomially small.  Returns
    (tau grid, real values); with `center` at the symmetry point of f the
    transform is real.
    """
    n = int(span * rate)
    t = center + (np.arange(n) - n // 2) / rate
    vals = f(t) ** power
    F = np.fft.fft(np.fft.ifftshift(vals)) / rate
    tau = np.fft.fftfreq(n, d=1.0 / rate)
    keep = np.abs(tau) <= tau_max
    order = np.argsort(tau[keep])
    return tau[keep][order], np.real(F[keep][order])


def save_table(path: Path, tolerance: float, step: float, values: np.ndarray) -> None:
    data = np.asarray(values, dtype="<f8")
    header = _CACHE_MAGIC + struct.pack("<Idd Q", _CACHE_VERSION, tolerance, step, len(data))
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(header + data.tobytes())
    os.replace(tmp, path)


def load_table(path: Path, tolerance: float, step: float):
    """Return the cached float64 array, or None on any mismatch."""
    try:
        raw = Path(path).read_bytes()
    except OSError:
        return None
    head = struct.calcsize("<Idd Q")
    if len(raw) < 4 + head or raw[:4] != _CACHE_MAGIC:
        return None
    version, tol, st, count = struct.unpack("<Idd Q", raw[4 : 4 + head])
    if version != _CACHE_VERSION or tol != tolerance or st != step:
        return None
    data = np.frombuffer(raw[4 + head :], dtype="<f8")
    if len(data) != count:
        return None
    return data.copy()


def cache_dir() -> Path:
    d = os.environ.get("KDVLAB_CACHE")
    if d:
        p = Path(d)
    else:
        p = Path.home() / ".cache" / "kdvlab"
    p.mkdir(parents=True, exist_ok=True)
    return p


@dataclass
class EtaProfile:
    """The time cutoff eta with cached transforms of eta and eta^4.

    eta(t) = 1 for |t| <= 1/2, eta(t) = 0 for |t| >= 1, smooth, in [0, 1].
    The tables hold F(eta)(tau) and F(eta^4)(tau) on a uniform tau grid
    (both real and even since eta is even), read through cubic splines.
    """

    bump: PlateauBump = field(default_factory=lambda: PlateauBump(-0.75, 0.75, 0.25))
    tau_max: float = 160.0
    rate: int = 512
    tolerance: float = TABLE_TOL
    profile_id: str = "eta-moll-plateau0.5-support1-r0.25-v1"

    def __post_init__(self):
        tag = f"{self.profile_id}-rate{self.rate}-tmax{self.tau_max:g}"
        step = 1.0 / 1024.0
        n = int(2 * self.tau_max / step) + 1
        self._tau = -self.tau_max + step * np.arange(n)
        self._step = step
        got = {}
        for power in (1, 4):
            f = cache_dir() / f"{tag}-pow{power}.tbl"
            vals = load_table(f, self.tolerance, step)
            if vals is None or len(vals) != n:
                tau, raw = fft_transform_table(
                    self.bump, power=power, tau_max=self.tau_max, rate=self.rate
                )
                sp = CubicSpline(tau, raw)
                vals = sp(self._tau)
                save_table(f, self.tolerance, step, vals)
            got[power] = vals
        self._t1 = got[1]
        self._t4 = got[4]
        self._sp1 = CubicSpline(self._tau, self._t1)
        self._sp4 = CubicSpline(self._tau, self._t4)

    def __call__(self, t) -> np.ndarray:
        return self.bump(t)

    def ft_eta(self, tau) -> np.ndarray:
        """F(eta)(tau), real and even; ~0 beyond the tabulated range."""
        tau = np.asarray(tau, dtype=float)
        out = np.where(np.abs(tau) <= self.tau_max, self._sp1(tau), 0.0)
        return out

    def ft_eta4(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return np.where(np.abs(tau) <= self.tau_max, self._sp4(tau), 0.0)

    def eta4_integral(self) -> float:
        return float(self._sp4(0.0))

    def eta4_table(self):
        """(first tau, step, values) of the dense F(eta^4) table, for kernels."""
        return float(self._tau[0]), float(self._step), self._t4

    def eta4_cutoff(self, floor: float = 1e-12) -> float:
        """Largest |tau| with |F(eta^4)| above `floor` (window truncation)."""
        big = np.abs(self._t4) > floor
        if not np.any(big):
            return 0.0
        return float(np.max(np.abs(self._tau[big])))


_DEFAULT_ETA: Optional[EtaProfile] = None


def default_eta() -> EtaProfile:
    global _DEFAULT_ETA
    if _DEFAULT_ETA is None:
        _DEFAULT_ETA = EtaProfile()
    return _DEFAULT_ETA


def phi_arc_bump() -> PlateauBump:
    """The major-arc bump: 1 on [1/100, 2/100], supported in [0, 3/100]."""
    return PlateauBump(0.5 / 100.0, 2.5 / 100.0, 0.5 / 100.0)


@dataclass
class PhiTransform:
    """F_[0,1] phi(tau) for the arc bump, via its even part.

    phi(t) = psi(t - c) with psi even around 0 and c the bump center, so
    F phi(tau) = exp(-2 pi i tau c) F psi(tau) with F psi real; only the real
    table is stored.
    """

    bump: PlateauBump = field(default_factory=phi_arc_bump)
    tau_max: float = 512.0
    rate: int = 65536
    tolerance: float = TABLE_TOL
    profile_id: str = "phi-moll-plateau[0.01,0.02]-support[0,0.03]-v1"

    def __post_init__(self):
        c = self.bump.center
        centered = lambda t: self.bump(t + c)  # even around 0
        tag = f"{self.profile_id}-rate{self.rate}-tmax{self.tau_max:g}"
        step = 1.0 / 64.0
        n = int(2 * self.tau_max / step) + 1
        self._tau = -self.tau_max + step * np.arange(n)
        f = cache_dir() / f"{tag}-pow1.tbl"
        vals = load_table(f, self.tolerance, step)
        if vals is None or len(vals) != n:
            tau, raw = fft_transform_table(
                centered, power=1, tau_max=self.tau_max, rate=self.rate, span=32.0
            )
            sp = CubicSpline(tau, raw)
            vals = sp(self._tau)
            save_table(f, self.tolerance, step, vals)
        self._sp = CubicSpline(self._tau, vals)
        self._center = c

    def __call__(self, tau) -> np.ndarray:
        """Complex F_[0,1] phi(tau)."""
        tau = np.asarray(tau, dtype=float)
        even = np.where(np.abs(tau) <= self.tau_max, self._sp(tau), 0.0)
        return np.exp(-2j * np.pi * tau * self._center) * even

    def even_part(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return np.where(np.abs(tau) <= self.tau_max, self._sp(tau), 0.0)


@dataclass
class EtaTilde:
    """eta~(t) = int |F eta(tau)| exp(2 pi i t tau) d tau, real and even.

    |F eta| has kinks at its zeros, so eta~ comes from plain trapezoid
    quadrature on the tabulated tau grid, precomputed once on a dense t grid
    over [-t_max, t_max] and read through a cubic spline; accuracy ~1e-6 is
    ample for the fitted-constant sweeps that consume it.
    """

    eta: EtaProfile
    t_max: float = 2.0

    def __post_init__(self):
        tau0, step, _ = self.eta.eta4_table()
        stride = 16  # tau resolution 1/64 resolves oscillations for |t| <= 2
        tau = (tau0 + step * np.arange(len(self.eta._t1)))[::stride]
        absF = np.abs(self.eta._t1)[::stride]
        dtau = step * stride
        tgrid = np.linspace(-self.t_max, self.t_max, 4097)
        vals = np.empty_like(tgrid)
        chunk = max(1, (1 << 22) // len(tau))
        for i in range(0, len(tgrid), chunk):
            tt = tgrid[i : i + chunk]
            vals[i : i + chunk] = (np.cos(2 * np.pi * np.outer(tt, tau)) @ absF) * dtau
        self._zero = float((np.sum(absF)) * dtau)
        self._spline = CubicSpline(tgrid, vals)

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self._spline(np.clip(t, -self.t_max, self.t_max)))

    def at_zero(self) -> float:
        return self._zero
