"""Empirical sweeps of the bilinear estimate across dyadic (L, N, lambda).

Each cell builds unit-mass block data, evaluates the bilinear L^4 norm, and
compares its fourth power against the closed-form right-hand side
    (1/lambda + 1/N^2) L^{3/4+eps} N^{3/4+eps}
      + min(N^{-(1-eps)}, 1/lambda + 1/N^2) L N.
The grid maximum of lhs^4 / rhs is the empirical constant of the estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .bumps import EtaProfile, default_eta
from .lattice import CoeffVector, DyadicBlock, TorusSpec, flat_block, random_block
from .norms import (
    CostGuardError,
    LevelSetTable,
    NormResult,
    airy_product_field,
    bilinear_l4,
    superlevel_measure,
)


def rhs_theorem2(L: int, N: int, lam: int, eps: float = 0.05) -> float:
    """The fourth-power right-hand side, evaluated exactly as displayed.

    Requires N >= L >= 1 and lambda >= 1 (the estimate is stated for
    N >= L; no silent symmetrization).
    """
    if not (N >= L >= 1):
        raise ValueError(f"rhs_theorem2 requires N >= L >= 1, got L={L}, N={N}")
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    first = (1.0 / lam + 1.0 / N**2) * L ** (0.75 + eps) * N ** (0.75 + eps)
    second = min(N ** (-(1.0 - eps)), 1.0 / lam + 1.0 / N**2) * L * N
    return first + second


@dataclass
class ScanCell:
    L: int
    N: int
    lam: int
    data_kind: str
    lhs: NormResult
    rhs: float
    ratio: float
    skipped_reason: Optional[str] = None


@dataclass
class ScanResult:
    cells: List[ScanCell]
    max_ratio: float
    eps: float
    seed: int


def make_block_data(
    scale: int, torus: TorusSpec, kind: str, rng: Optional[np.random.Generator] = None
) -> CoeffVector:
    """Unit-(d xi)_lambda-mass data on the dyadic annulus at `scale`."""
    block = DyadicBlock(scale)
    if kind == "flat":
        return flat_block(block, torus, unit_mass=True)
    if kind == "random":
        if rng is None:
            raise ValueError("random data needs a generator")
        return random_block(block, torus, rng, unit_mass=True)
    raise ValueError(f"unknown data kind {kind!r}")


def scan(
    L_list: Sequence[int],
    N_list: Sequence[int],
    lambda_list: Sequence[int],
    data_kind: str = "flat",
    seed: int = 0,
    eps: float = 0.05,
    eta: Optional[EtaProfile] = None,
    n_t: int = 1024,
    shifts: int = 8,
    pair_guard: float = 1e8,
    shards: int = 1,
) -> ScanResult:
    """Evaluate every admissible cell (L <= N) of the grid.

    Flat cells are deterministic; random cells draw both blocks from a
    generator seeded per cell (derived from `seed` and the cell key), so a
    duplicate seed reproduces every cell bit for bit.
    """
    if eta is None:
        eta = default_eta()
    cells: List[ScanCell] = []
    for lam in lambda_list:
        torus = TorusSpec(int(lam))
        for N in N_list:
            for L in L_list:
                if L > N:
                    continue
                cell_seed = np.random.SeedSequence((seed, lam, N, L, 1)).generate_state(1)[0]
                rng = np.random.default_rng(cell_seed)
                uL = make_block_data(L, torus, data_kind, rng)
                uN = make_block_data(N, torus, data_kind, rng)
                rhs = rhs_theorem2(L, N, lam, eps)
                try:
                    lhs = bilinear_l4(
                        uL,
                        uN,
                        torus,
                        eta=eta,
                        mode="auto",
                        pair_guard=pair_guard,
                        n_t=n_t,
                        shifts=shifts,
                        seed=int(cell_seed),
                        shards=shards,
                    )
                except CostGuardError as e:
                    cells.append(
                        ScanCell(L, N, lam, data_kind, NormResult(0.0, 4, "sampled"), rhs, 0.0,
                                 skipped_reason=str(e))
                    )
                    continue
                ratio = lhs.pth_power() / rhs
                cells.append(ScanCell(L, N, lam, data_kind, lhs, rhs, ratio))
    done = [c for c in cells if c.skipped_reason is None]
    max_ratio = max((c.ratio for c in done), default=0.0)
    return ScanResult(cells=cells, max_ratio=max_ratio, eps=eps, seed=seed)


# ---------------------------------------------------------------------------
# level-set interpolation chain
# ---------------------------------------------------------------------------


@dataclass
class LevelSetChainReport:
    L: int
    N: int
    lam: int
    table: LevelSetTable
    sup_bound: float  # rigorous Cauchy-Schwarz sup bound for |B|
    empty_beyond_bound: bool
    layer_cake_rel_err: float
    in2_fitted: float  # max over mu of mu^2 |E_mu| / (1/lambda + 1/N^2)
    in1_fitted: float  # max over mu of mu^2 |E_mu| / (L^{3/4+} N^{3/4+} |E_mu| + N^{-(1-eps)})
    split_low_fourth: float
    split_high_fourth: float
    eps: float


def levelset_chain_check(
    L: int,
    N: int,
    lam: int,
    data_kind: str = "flat",
    seed: int = 0,
    grid: Tuple[int, int] = (512, 512),
    eps: float = 0.05,
    eta: Optional[EtaProfile] = None,
) -> LevelSetChainReport:
    """Tabulate |E_mu| for the product field and check the chain of bounds.

    Checks performed: (a) |E_mu| = 0 for mu above the exact Cauchy-Schwarz
    sup bound (for unit masses that bound is 2 sqrt(L N) at eta's peak);
    (b) the layer-cake integral of the table reproduces the direct fourth
    power from the same samples; (c) the fitted constants in
    mu^2 |E_mu| <= C (1/lambda + 1/N^2) and its major-arc companion, plus
    the layer-cake split at mu0 = (L N)^{3/8 + eps/2}.
    """
    torus = TorusSpec(lam)
    if eta is None:
        eta = default_eta()
    cell_seed = np.random.SeedSequence((seed, lam, N, L, 2)).generate_state(1)[0]
    rng = np.random.default_rng(cell_seed)
    uL = make_block_data(L, torus, data_kind, rng)
    uN = make_block_data(N, torus, data_kind, rng)
    sampler = airy_product_field(uL, uN, eta)
    table = superlevel_measure(sampler, torus, (-1.0, 1.0), grid)
    # exact sup bound: |u| <= lambda^{-1} sum |a| and eta <= 1
    sup_bound = (
        float(np.sum(np.abs(uL.amplitudes()))) * float(np.sum(np.abs(uN.amplitudes()))) / lam**2
    )
    empty = table.sup_value <= sup_bound + 1e-12
    lc = table.layer_cake_fourth()
    direct = table.direct_fourth
    rel = abs(lc - direct) / direct if direct > 0 else 0.0
    mu = table.thresholds
    e = table.measures
    in2_den = 1.0 / lam + 1.0 / N**2
    in2_fit = float(np.max(mu**2 * e)) / in2_den
    in1_den = L ** (0.75 + eps) * N ** (0.75 + eps) * e + N ** (-(1.0 - eps))
    in1_fit = float(np.max(np.where(in1_den > 0, mu**2 * e / in1_den, 0.0)))
    mu0 = (L * N) ** (0.375 + 0.5 * eps)
    low = mu[mu <= mu0]
    elow = e[mu <= mu0]
    split_low = float(np.trapezoid(4 * low**3 * elow, low)) if len(low) > 1 else 0.0
    split_low += float(table.total_measure * mu[0] ** 4)
    split_high = lc - split_low
    return LevelSetChainReport(
        L=L,
        N=N,
        lam=lam,
        table=table,
        sup_bound=sup_bound,
        empty_beyond_bound=empty,
        layer_cake_rel_err=rel,
        in2_fitted=in2_fit,
        in1_fitted=in1_fit,
        split_low_fourth=split_low,
        split_high_fourth=split_high,
        eps=eps,
    )


def lambda_trend(
    scale: int,
    lambda_list: Sequence[int],
    eta: Optional[EtaProfile] = None,
    **kwargs,
) -> List[Tuple[int, float]]:
    """lhs^8 of the self-product of the flat block at L = N = scale, per
    lambda.  The limit-period heuristic says this should decrease in lambda."""
    out = []
    for lam in lambda_list:
        torus = TorusSpec(lam)
        u = make_block_data(scale, torus, "flat")
        res = bilinear_l4(u, u, torus, eta=eta, **kwargs)
        out.append((lam, res.pth_power() ** 2))
    return out
