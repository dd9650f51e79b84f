"""Self-contained small-scale convex machinery.

Dense Hermitian SDP (primal-dual interior point on the real embedding),
dense two-phase simplex LP, the two Euclidean projections used by the
projected-gradient designer, and a generic bisection driver.
"""

from .bisection import BracketError, bisect
from .lp import LinearProgram, LpResult, solve_lp
from .projections import project_ellipsoid, project_power_halfspace
from .sdp import SdpProblem, SdpSolution, solve_sdp, solve_sdp_with_free_margin

__all__ = [
    "BracketError",
    "bisect",
    "LinearProgram",
    "LpResult",
    "solve_lp",
    "project_ellipsoid",
    "project_power_halfspace",
    "SdpProblem",
    "SdpSolution",
    "solve_sdp",
    "solve_sdp_with_free_margin",
]
