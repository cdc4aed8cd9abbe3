from .curves import ExpCurve
from .extinction import (
    ExtinctionTable,
    FixedPoint,
    VdcbpExtinction,
    extinction_probabilities,
    minimal_fixed_point,
    vdcbp_extinction,
)
from .scalar import (
    MartingaleCoeffs,
    expectation_coeffs,
    expectation_curve,
    expected_population,
    martingale_coeffs,
    martingale_matrix,
)
from .shares import (
    ShareCoeffs,
    exact_shares,
    exclusive_h,
    exclusive_shares_curve,
    mixed_shares_coeffs,
    mixed_shares_curve,
    share_parts,
    shares_curve,
)
from .vector import Growth, cross_matrix, vdcbp_expected_y, vdcbp_growth, vdcbp_martingale_value

__all__ = [
    "ExpCurve",
    "ExtinctionTable",
    "FixedPoint",
    "Growth",
    "MartingaleCoeffs",
    "ShareCoeffs",
    "VdcbpExtinction",
    "cross_matrix",
    "exact_shares",
    "exclusive_h",
    "exclusive_shares_curve",
    "expectation_coeffs",
    "expectation_curve",
    "expected_population",
    "extinction_probabilities",
    "martingale_coeffs",
    "martingale_matrix",
    "minimal_fixed_point",
    "mixed_shares_coeffs",
    "mixed_shares_curve",
    "share_parts",
    "shares_curve",
    "vdcbp_expected_y",
    "vdcbp_extinction",
    "vdcbp_growth",
    "vdcbp_martingale_value",
]
