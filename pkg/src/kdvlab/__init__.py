"""Numerical laboratory for space-time norms of the periodic Airy/KdV flow.

The flow under study multiplies the Fourier mode at frequency xi by
exp(2 pi i xi^3 t).  Everything here lives on the torus T_lambda = R/(lambda Z)
with the frequency lattice Z/lambda, and all frequency bookkeeping is done on
exact integer numerators k (xi = k/lambda).
"""

__version__ = "0.1.0"

from .lattice import (
    TorusSpec,
    CoeffVector,
    DyadicBlock,
    SpaceTimePoint,
    PairSpectrum,
    FrequencyOverflowError,
    airy_phase,
    evolve,
    pair_spectrum,
    cubic_identity_check,
    resonance_roots,
    project_mean_zero,
)
from .norms import (
    NormResult,
    LevelSetTable,
    lp_exact_torus,
    l4_closed_form,
    lp_sampled,
    bilinear_l4,
    superlevel_measure,
)
from .bumps import EtaProfile, default_eta, phi_arc_bump

__all__ = [
    "TorusSpec",
    "CoeffVector",
    "DyadicBlock",
    "SpaceTimePoint",
    "PairSpectrum",
    "FrequencyOverflowError",
    "airy_phase",
    "evolve",
    "pair_spectrum",
    "cubic_identity_check",
    "resonance_roots",
    "project_mean_zero",
    "NormResult",
    "LevelSetTable",
    "lp_exact_torus",
    "l4_closed_form",
    "lp_sampled",
    "bilinear_l4",
    "superlevel_measure",
    "EtaProfile",
    "default_eta",
    "phi_arc_bump",
    "__version__",
]
