"""Closed-form evaluation of the quantitative gradient-estimate constants.

Every function here is a pure arithmetic transcription of an explicit
constant: the cutoff-function constant on a geodesic ball, the localized
derivative bound, the main sup-norm estimate

    sup_{D0} |du| <= C ( 2 delta/r0 sup_D|u| + r0/(2 delta) sup_D|2Lu| ),

its eigenfunction corollaries (local and global), the L^p integral version
with a Burkholder-Davis-Gundy constant, and the differential-form variants.
Negative parts are written ``x^- = max(0, -x)`` throughout.

The BDG constant is not pinned by the estimates themselves: ``C_2 = 1`` is
the Ito isometry and is hard-wired; for ``q in {3, 4}`` a reference table
``C_q = (q(q-1)/2)^{q/2}`` is shipped (the classical Ito-plus-Doob bound for
continuous martingales, external to the gradient estimates); any other ``q``
requires an explicit value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "BoundsError",
    "BoundInputs",
    "cutoff_constant",
    "lemma_est_bound",
    "prelim_gradient_bound",
    "main_constant",
    "main_bound",
    "optimize_delta",
    "taylor_bound",
    "eigen_bound_local",
    "eigen_bound_global",
    "bdg_constant",
    "intlem_bound",
    "lp_bound",
    "forms_constant",
    "forms_bound",
    "eigen_forms_bound",
    "delta_preset_gp",
    "BDG_REFERENCE",
]


class BoundsError(ValueError):
    """Invalid bound parameters."""


def _neg(x: float) -> float:
    """Negative part: max(0, -x)."""
    return max(0.0, -x)


def _exp(x: float) -> float:
    """exp that saturates to inf instead of overflowing (tiny-delta grids)."""
    return math.inf if x > 700.0 else math.exp(x)


@dataclass(frozen=True)
class BoundInputs:
    """Inputs shared by the closed-form constants.

    ``K0_minus``/``KZ_minus`` are already negative parts (>= 0); ``K`` is a
    signed global Ricci lower bound.  ``p > 1`` fixes ``q = p/(p-1)``.
    The form data are the signed inf/sup of the Weitzenboeck endomorphism on
    p-forms over D and the signed inf on (p +/- 1)-forms.
    """

    n: int
    r0: float
    delta: float
    K0_minus: float = 0.0
    KZ_minus: float = 0.0
    supZ: float = 0.0
    lam: Optional[float] = None
    K: Optional[float] = None
    p: Optional[float] = None
    C_q: Optional[float] = None
    form_K_low_p: Optional[float] = None
    form_K_up_p: Optional[float] = None
    form_K_low_p_plus: Optional[float] = None
    form_K_low_p_minus: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise BoundsError("dimension must be >= 1")
        if self.r0 <= 0:
            raise BoundsError("r0 must be positive")
        if self.delta <= 0:
            raise BoundsError("delta must be positive")
        if self.K0_minus < 0 or self.KZ_minus < 0 or self.supZ < 0:
            raise BoundsError("curvature/drift deficiencies must be >= 0")
        if self.p is not None and self.p <= 1:
            raise BoundsError("p must exceed 1")
        if self.lam is not None and self.lam <= 0:
            raise BoundsError("eigenvalue must be positive")

    @property
    def q(self) -> float:
        if self.p is None:
            raise BoundsError("no p given")
        return self.p / (self.p - 1.0)

    def with_delta(self, delta: float) -> "BoundInputs":
        from dataclasses import replace

        return replace(self, delta=delta)


# ---------------------------------------------------------------------------
# Localization constants
# ---------------------------------------------------------------------------


def cutoff_constant(n: int, radius: float, K0_minus: float, supZ: float) -> float:
    """Bound on ``c(phi)`` for the cosine cutoff on a ball of radius r:

        c = pi/(2r) (2 sup|Z| + sqrt((n-1) K0^-)) + pi^2 (n+3) / (4 r^2).
    """
    if radius <= 0:
        raise BoundsError("ball radius must be positive")
    return (math.pi / (2.0 * radius)) * (
        2.0 * supZ + math.sqrt((n - 1) * K0_minus)
    ) + math.pi**2 * (n + 3) / (4.0 * radius**2)


def lemma_est_bound(c: float, t: float) -> float:
    """``E int_0^{t ^ tau} hdot^2 ds <= c / (1 - e^{-ct})`` (diverges as t->0)."""
    if c <= 0 or t <= 0:
        raise BoundsError("c and t must be positive")
    return c / (1.0 - math.exp(-c * t))


def prelim_gradient_bound(inp: BoundInputs, supU: float, t: float) -> float:
    """Localized bound on ``|d P1_t u|(x)`` and ``|d P2_t u|(x)`` for x in D0:

        sup_D|u| * (1/sqrt(t)) * (c t e^{K_Z^- t} / (1 - e^{-ct}))^{1/2}
    """
    if supU < 0:
        raise BoundsError("sup-norm must be >= 0")
    if t <= 0:
        raise BoundsError("t must be positive")
    c = cutoff_constant(inp.n, inp.r0, inp.K0_minus, inp.supZ)
    return supU * math.sqrt(c * math.exp(inp.KZ_minus * t) / (1.0 - math.exp(-c * t)))


# ---------------------------------------------------------------------------
# Main sup-norm estimate
# ---------------------------------------------------------------------------


def main_constant(inp: BoundInputs) -> float:
    """The explicit constant of the main estimate:

        C = exp[ pi r0/(16 d^2) (2 sup|Z| + sqrt((n-1) K0^-))
                 + pi^2 (n+3)/(32 d^2) + r0^2 K_Z^- / (8 d^2) ].
    """
    d2 = inp.delta**2
    expo = (
        math.pi * inp.r0 / (16.0 * d2) * (2.0 * inp.supZ + math.sqrt((inp.n - 1) * inp.K0_minus))
        + math.pi**2 * (inp.n + 3) / (32.0 * d2)
        + inp.r0**2 * inp.KZ_minus / (8.0 * d2)
    )
    return _exp(expo)


def main_bound(inp: BoundInputs, supU: float, supLu2: float) -> float:
    """Right-hand side ``C (2 delta/r0 supU + r0/(2 delta) sup|2Lu|)``."""
    if supU < 0 or supLu2 < 0:
        raise BoundsError("sup-norms must be >= 0")
    C = main_constant(inp)
    return C * (2.0 * inp.delta / inp.r0 * supU + inp.r0 / (2.0 * inp.delta) * supLu2)


def optimize_delta(
    fn, lo: float = 1e-2, hi: float = 1e2, n_grid: int = 200
) -> tuple[float, float]:
    """Best value of ``fn(delta)`` over a log grid; returns (delta, value)."""
    grid = np.geomspace(lo, hi, n_grid)
    vals = np.array([fn(float(d)) for d in grid])
    i = int(np.argmin(vals))
    return float(grid[i]), float(vals[i])


def taylor_bound(r0: float, supU: float, supHess: float) -> float:
    """Derivative bound from second-order expansion along radial geodesics:
    ``2 supU / r0 + r0 supHess / 2``."""
    if r0 <= 0:
        raise BoundsError("r0 must be positive")
    if supU < 0 or supHess < 0:
        raise BoundsError("sup-norms must be >= 0")
    return 2.0 * supU / r0 + 0.5 * r0 * supHess


# ---------------------------------------------------------------------------
# Eigenfunction corollaries
# ---------------------------------------------------------------------------


def eigen_bound_local(inp: BoundInputs, supU: float) -> float:
    """``sqrt(lam) C^{1/lam} (2 delta/r0 + r0/(2 delta)) supU`` with the main
    constant evaluated at ``delta sqrt(lam)`` (for ``2Lu = -lam u``)."""
    if inp.lam is None:
        raise BoundsError("eigenvalue required")
    if supU < 0:
        raise BoundsError("sup-norm must be >= 0")
    lam = inp.lam
    C = main_constant(inp.with_delta(inp.delta * math.sqrt(lam)))
    return (
        math.sqrt(lam)
        * C ** (1.0 / lam)
        * (2.0 * inp.delta / inp.r0 + inp.r0 / (2.0 * inp.delta))
        * supU
    )


def eigen_bound_global(K: float, lam: float, supU: float) -> float:
    """Whole-manifold eigenfunction bound for ``Ric >= K``, ``Lap u = -lam u``:

        |du|_inf <= |u|_inf e sqrt(lam/2) ((1 - e^{-2K/lam}) / (2K/lam))^{1/2},

    with the K -> 0 limit of the last factor equal to 1.
    """
    if lam <= 0:
        raise BoundsError("eigenvalue must be positive")
    if supU < 0:
        raise BoundsError("sup-norm must be >= 0")
    xk = 2.0 * K / lam
    factor = 1.0 if abs(xk) < 1e-12 else (1.0 - math.exp(-xk)) / xk
    return supU * math.e * math.sqrt(lam / 2.0) * math.sqrt(factor)


# ---------------------------------------------------------------------------
# Integral estimates
# ---------------------------------------------------------------------------

# classical continuous-martingale moment bound (q(q-1)/2)^{q/2}, q >= 2;
# q = 2 is the Ito isometry (exact)
BDG_REFERENCE = {2.0: 1.0, 3.0: (3.0) ** 1.5, 4.0: 36.0}


def bdg_constant(q: float) -> Optional[float]:
    """Reference BDG constant ``C_q`` or None if ``q`` is not tabulated."""
    return BDG_REFERENCE.get(float(q))


def _resolve_cq(inp: BoundInputs) -> float:
    q = inp.q
    if inp.C_q is not None:
        if inp.C_q <= 0:
            raise BoundsError("C_q must be positive")
        return inp.C_q
    ref = bdg_constant(q)
    if ref is None:
        raise BoundsError(
            f"no reference BDG constant for q={q}; supply C_q explicitly"
        )
    return ref


def intlem_bound(inp: BoundInputs, normU: float, t: float) -> float:
    """``||d P_t u||_p <= e^{K^- t/2} / sqrt(t) C_q^{1/q} ||u||_p``."""
    if t <= 0:
        raise BoundsError("t must be positive")
    if normU < 0:
        raise BoundsError("norm must be >= 0")
    if inp.K is None:
        raise BoundsError("global Ricci lower bound K required")
    cq = _resolve_cq(inp)
    return math.exp(_neg(inp.K) * t / 2.0) / math.sqrt(t) * cq ** (1.0 / inp.q) * normU


def lp_bound(inp: BoundInputs, normU: float, normLap: float) -> float:
    """Global integral estimate

        ||du||_p <= C_q^{1/q} e^{K^-/(8 delta^2)}
                    (2 delta ||u||_p + ||Lap u||_p / (2 delta)).
    """
    if normU < 0 or normLap < 0:
        raise BoundsError("norms must be >= 0")
    if inp.K is None:
        raise BoundsError("global Ricci lower bound K required")
    cq = _resolve_cq(inp)
    return (
        cq ** (1.0 / inp.q)
        * math.exp(_neg(inp.K) / (8.0 * inp.delta**2))
        * (2.0 * inp.delta * normU + normLap / (2.0 * inp.delta))
    )


# ---------------------------------------------------------------------------
# Differential forms
# ---------------------------------------------------------------------------


def _form_curvature_term(inp: BoundInputs, sign: str) -> float:
    if sign not in ("+", "-"):
        raise BoundsError("sign must be '+' or '-'")
    low_p = inp.form_K_low_p
    up_p = inp.form_K_up_p
    low_pm = inp.form_K_low_p_plus if sign == "+" else inp.form_K_low_p_minus
    if low_p is None or up_p is None or low_pm is None:
        raise BoundsError("form curvature bounds missing")
    return low_p + _neg(up_p + low_pm)


def forms_constant(inp: BoundInputs, sign: str) -> float:
    """``C_{p,+/-}`` for p-forms; as the main constant but with the
    Weitzenboeck term ``K_low_p + (K_up_p + K_low_{p +/- 1})^-``."""
    d2 = inp.delta**2
    expo = (
        math.pi * inp.r0 / (16.0 * d2) * (2.0 * inp.supZ + math.sqrt((inp.n - 1) * inp.K0_minus))
        + math.pi**2 * (inp.n + 3) / (32.0 * d2)
        + inp.r0**2 * _form_curvature_term(inp, sign) / (8.0 * d2)
    )
    return _exp(expo)


def forms_bound(inp: BoundInputs, sign: str, supAlpha: float, supLapAlpha: float) -> float:
    """``sup_{D0}|d alpha|`` (sign "+") or ``sup_{D0}|delta alpha|`` ("-")
    bounded by ``C_{p,+/-} (2 delta/r0 sup|alpha| + r0/(2 delta) sup|Lap alpha|)``."""
    if supAlpha < 0 or supLapAlpha < 0:
        raise BoundsError("sup-norms must be >= 0")
    C = forms_constant(inp, sign)
    return C * (
        2.0 * inp.delta / inp.r0 * supAlpha + inp.r0 / (2.0 * inp.delta) * supLapAlpha
    )


def eigen_forms_bound(inp: BoundInputs, sign: str, supAlpha: float) -> float:
    """Eigenform variant (``Hodge-Lap alpha = -lam alpha``):
    ``sqrt(lam) C_{p,+/-}^{1/lam} (2 delta/r0 + r0/(2 delta)) sup|alpha|``
    with the constant at ``delta sqrt(lam)``."""
    if inp.lam is None:
        raise BoundsError("eigenvalue required")
    if supAlpha < 0:
        raise BoundsError("sup-norm must be >= 0")
    lam = inp.lam
    C = forms_constant(inp.with_delta(inp.delta * math.sqrt(lam)), sign)
    return (
        math.sqrt(lam)
        * C ** (1.0 / lam)
        * (2.0 * inp.delta / inp.r0 + inp.r0 / (2.0 * inp.delta))
        * supAlpha
    )


def delta_preset_gp(r0: float, K_minus: float) -> float:
    """Named preset ``delta^2 = (1 v r0)^2 (1 v K^-)`` recovering the
    curvature/radius shape of the comparison constant in the literature."""
    if r0 <= 0 or K_minus < 0:
        raise BoundsError("need r0 > 0 and K^- >= 0")
    return max(1.0, r0) * math.sqrt(max(1.0, K_minus))
