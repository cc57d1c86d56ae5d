"""Closed-form wander and broadening formulas for the weak-turbulence regime.

Implements the analytic chain: the I1 quadrature, the weak-turbulence
centroid wander variance, the classic (fully coherent, short-path)
wander formula, the beam radius including turbulent broadening, the
strong-turbulence dominance condition, and the cross-correlation wander
estimate valid in that regime.

All lengths are SI meters, wavenumbers 1/m, phases radians.
"""

from __future__ import annotations

import dataclasses
import math
import typing

import numpy as np

from .exceptions import ParameterDomainError
from .phase_screen import SourceParams
from .spectra import TurbulenceParams, _composite_gauss

#: Speed of light, m/s, for omega0 = c * q0.
SPEED_OF_LIGHT = 299792458.0

#: Turbulent broadening constant: Delta_Rb^2 = 4 * 0.558 * cn2 * l0^(-1/3) * z^3.
BROADENING_T_COEFF = 0.558

#: Dominance factor operationalizing "much greater" in the strong-turbulence test.
STRONG_DOMINANCE_FACTOR = 10.0


@dataclasses.dataclass(frozen=True)
class GeometryParams:
    """Propagation geometry: path length z in meters."""

    z: float

    def __post_init__(self):
        if not (self.z > 0.0 and math.isfinite(self.z)):
            raise ParameterDomainError(f"propagation distance must be > 0, got {self.z}")


def angular_frequency(src: SourceParams) -> float:
    """omega0 = c * q0 for the source's central wavenumber."""
    return SPEED_OF_LIGHT * src.q0


@dataclasses.dataclass(frozen=True)
class WanderPrediction:
    """Weak-turbulence wander variance with its quadrature ingredients.

    regime is one of "weak-analytic", "asymptotic-short" (a2 >> 1),
    "asymptotic-long" (a2 << 1); the label is informational, the value
    always comes from the full quadrature.
    """

    rw2: float
    regime: str
    i1: float
    a2: float


_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def _gamma(x: float) -> float:
    """Lanczos approximation of the Gamma function for real x > 0."""
    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _gamma(1.0 - x))
    x -= 1.0
    acc = _LANCZOS_COEFFS[0]
    for i, c in enumerate(_LANCZOS_COEFFS[1:], start=1):
        acc += c / (x + i)
    t = x + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (x + 0.5) * math.exp(-t) * acc


def gamma_one_sixth() -> float:
    """Gamma(1/6), used in the weak-turbulence wander prefactor."""
    return _gamma(1.0 / 6.0)


def i1_integral(a2: float, abs_tol: float = 1e-8) -> float:
    """The wander form-factor integral I1(a2).

    I1(a2) = integral_0^1 (x - 1)^2 (x^2 + a2)^(-1/6) dx, evaluated
    after the substitution x = t^3 which removes the integrable endpoint
    singularity at a2 = 0:

        I1 = integral_0^1 3 t^2 (t^3 - 1)^2 (t^6 + a2)^(-1/6) dt.

    Adaptive (order-doubling) Gauss-Legendre to absolute tolerance
    ``abs_tol``.  Range is (0, 27/40]; strictly decreasing in a2.
    """
    if not (a2 >= 0.0 and math.isfinite(a2)):
        raise ParameterDomainError(f"a2 must be finite and >= 0, got {a2}")

    def integrand(t):
        t3 = t ** 3
        return 3.0 * t * t * (t3 - 1.0) ** 2 * (t3 * t3 + a2) ** (-1.0 / 6.0)

    # convert the absolute target to a relative one; I1 >= I1_at_a2
    # never drops below ~0.03 for the a2 of interest, and the doubling
    # loop overshoots in practice.
    scale = max(0.675 * (1.0 + a2) ** (-1.0 / 6.0), 1e-12)
    edges = np.array([0.0, 0.5, 1.0])
    val, _ = _composite_gauss(integrand, edges, rel_tol=abs_tol / scale)
    return val


def _a2_parameter(src: SourceParams, turb: TurbulenceParams, geom: GeometryParams) -> float:
    lr = turb.l0_reduced
    return (src.r0 ** 2 / 4.0 + lr * lr) * src.q0 ** 2 * src.r1 ** 2 / geom.z ** 2


def wander_variance_weak(
    src: SourceParams, turb: TurbulenceParams, geom: GeometryParams
) -> WanderPrediction:
    """Weak-turbulence centroid wander variance <R_w^2>, m^2.

    <R_w^2> = 0.066 pi^2 Gamma(1/6) cn2 z^(8/3) (q0 r1)^(1/3) I1(a2)
    with a2 = (r0^2/4 + l0'^2) q0^2 r1^2 / z^2.

    The formula is evaluated regardless of regime; ``regime`` labels the
    asymptotic branch for the caller (the weak-turbulence applicability
    itself is the caller's responsibility).
    """
    a2 = _a2_parameter(src, turb, geom)
    i1 = i1_integral(a2)
    rw2 = (
        0.066
        * math.pi ** 2
        * gamma_one_sixth()
        * turb.cn2
        * geom.z ** (8.0 / 3.0)
        * (src.q0 * src.r1) ** (1.0 / 3.0)
        * i1
    )
    if a2 > 100.0:
        regime = "asymptotic-short"
    elif a2 < 0.01:
        regime = "asymptotic-long"
    else:
        regime = "weak-analytic"
    return WanderPrediction(rw2=rw2, regime=regime, i1=i1, a2=a2)


def classic_wander(cn2: float, z: float, r0: float) -> float:
    """Classic coherent-beam wander formula 1.919 cn2 z^3 (2 r0)^(-1/3), m^2."""
    if cn2 < 0.0:
        raise ParameterDomainError(f"cn2 must be >= 0, got {cn2}")
    if not (z > 0.0 and r0 > 0.0):
        raise ParameterDomainError("z and r0 must be > 0")
    return 1.919 * cn2 * z ** 3 * (2.0 * r0) ** (-1.0 / 3.0)


def turbulence_spread(turb: TurbulenceParams, geom: GeometryParams) -> float:
    """Turbulent broadening Delta_Rb^2 = 4 z^3 T, with T = 0.558 cn2 l0^(-1/3).

    The inner scale enters literally (not the reduced l0'); this is the
    single source of truth for the broadening constant used by
    beam_radius_squared, strong_turbulence_condition and
    cross_correlation_wander.
    """
    t_coeff = BROADENING_T_COEFF * turb.cn2 * turb.l0 ** (-1.0 / 3.0)
    return 4.0 * geom.z ** 3 * t_coeff


def beam_radius_squared(
    src: SourceParams, turb: TurbulenceParams, geom: GeometryParams
) -> float:
    """Long-term mean-square beam radius R_b^2, m^2.

    R_b^2 = (r0^2/2) [1 + 4 z^2/(q0^2 r0^2 r1^2) + 8 z^3 T / r0^2].
    """
    z = geom.z
    vacuum = 4.0 * z * z / (src.q0 ** 2 * src.r0 ** 2 * src.r1 ** 2)
    spread = 2.0 * turbulence_spread(turb, geom) / src.r0 ** 2
    return (src.r0 ** 2 / 2.0) * (1.0 + vacuum + spread)


class StrongTurbulence(typing.NamedTuple):
    strong: bool
    margin: float


def strong_turbulence_condition(
    src: SourceParams, turb: TurbulenceParams, geom: GeometryParams
) -> StrongTurbulence:
    """Whether turbulent broadening dominates source size plus diffraction.

    Returns (strong, margin) where margin is the ratio
    Delta_Rb^2 / (r0^2/2 + 2 z^2/(q0^2 r1^2)); strong when the margin
    exceeds STRONG_DOMINANCE_FACTOR.  Margin is linear in cn2.
    """
    base = src.r0 ** 2 / 2.0 + 2.0 * geom.z ** 2 / (src.q0 ** 2 * src.r1 ** 2)
    margin = turbulence_spread(turb, geom) / base
    return StrongTurbulence(strong=margin > STRONG_DOMINANCE_FACTOR, margin=margin)


class CrossCorrelationWander(typing.NamedTuple):
    rw2_cross: float
    advisory: bool


def cross_correlation_wander(
    src: SourceParams, turb: TurbulenceParams, geom: GeometryParams
) -> CrossCorrelationWander:
    """Cross-correlation wander contribution in strong turbulence, m^2.

    <R_w^2>_cross = (8/3) (r1^2/r0^2) z^2 / (q0^2 Delta_Rb^2).

    ``advisory`` is set when the strong-turbulence condition does not
    hold, in which case the value is an extrapolation.
    """
    if turb.cn2 == 0.0:
        raise ParameterDomainError(
            "cross-correlation wander is undefined at cn2 = 0 (no broadening)"
        )
    spread = turbulence_spread(turb, geom)
    value = (
        (8.0 / 3.0)
        * (src.r1 ** 2 / src.r0 ** 2)
        * geom.z ** 2
        / (src.q0 ** 2 * spread)
    )
    strong = strong_turbulence_condition(src, turb, geom)
    return CrossCorrelationWander(rw2_cross=value, advisory=not strong.strong)
