"""Refractive-index fluctuation spectrum and derived phase statistics.

Conventions
-----------
The 3-D spectrum uses the transform convention

    B_n(rho) = integral d^3g  psi(g) exp(i g . rho),

under which the von Karman spectrum reads

    psi(g) = 0.033 Cn2 exp(-(g l0 / 2 pi)^2) / (g^2 + L0^-2)^(11/6).

A thin turbulent layer of thickness ``dz`` traversed at central
wavenumber ``q0`` imprints a phase whose 2-D spectral density is the
standard thin-screen projection

    F_phi(kappa) = 2 pi q0^2 dz psi(kappa),

with the same exp(i kappa . rho) convention in two dimensions.  The
corresponding layer phase structure function, used to validate
generated screens, is the radial (Hankel) transform

    D_phi(dr) = 8 pi^2 q0^2 dz integral_0^inf psi(k) [1 - J0(k dr)] k dk.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np
from scipy.special import j0

from .exceptions import NumericalAccuracyError, ParameterDomainError

TWO_PI = 2.0 * math.pi

#: Kolmogorov amplitude constant in psi(g).
KOLMOGOROV_AMPLITUDE = 0.033


@dataclasses.dataclass(frozen=True)
class TurbulenceParams:
    """Von Karman turbulence description.

    Parameters
    ----------
    cn2 : float
        Refractive-index structure constant, m^(-2/3).
    l0 : float
        Inner scale, m.
    L0 : float
        Outer scale, m.
    """

    cn2: float
    l0: float
    L0: float

    def __post_init__(self):
        if not (self.cn2 >= 0.0 and math.isfinite(self.cn2)):
            raise ParameterDomainError(f"cn2 must be finite and >= 0, got {self.cn2}")
        if not (self.l0 > 0.0 and math.isfinite(self.l0)):
            raise ParameterDomainError(f"l0 must be finite and > 0, got {self.l0}")
        if not (self.L0 > self.l0):
            raise ParameterDomainError(
                f"outer scale must exceed inner scale, got l0={self.l0}, L0={self.L0}"
            )

    @property
    def l0_reduced(self) -> float:
        """Reduced inner scale l0' = l0 / (2 pi), the Gaussian-cutoff length."""
        return self.l0 / TWO_PI


def von_karman_psd(g, params: TurbulenceParams):
    """Von Karman spectral density psi(g).

    Parameters
    ----------
    g : float or ndarray
        Spatial frequency magnitude, 1/m. Must be >= 0.
    params : TurbulenceParams

    Returns
    -------
    float or ndarray
        Spectral density, nonnegative, linear in cn2.
    """
    g = np.asarray(g, dtype=float)
    if np.any(g < 0.0):
        raise ParameterDomainError("spatial frequency must be >= 0")
    lr = params.l0_reduced
    out = (
        KOLMOGOROV_AMPLITUDE
        * params.cn2
        * np.exp(-((g * lr) ** 2))
        / (g * g + params.L0 ** -2) ** (11.0 / 6.0)
    )
    if out.ndim == 0:
        return float(out)
    return out


def phase_psd(kappa, params: TurbulenceParams, dz: float, q0: float):
    """2-D spectral density of the phase of a thin layer of thickness dz.

    F_phi(kappa) = 2 pi q0^2 dz psi(kappa); see the module docstring for
    the transform convention.
    """
    if not dz > 0.0:
        raise ParameterDomainError(f"layer thickness must be > 0, got {dz}")
    if not q0 > 0.0:
        raise ParameterDomainError(f"central wavenumber must be > 0, got {q0}")
    return TWO_PI * q0 * q0 * dz * von_karman_psd(kappa, params)


@functools.lru_cache(maxsize=8)
def _leggauss(order: int):
    return np.polynomial.legendre.leggauss(order)


def _composite_gauss(f, edges: np.ndarray, rel_tol: float) -> tuple[float, float]:
    """Composite Gauss-Legendre quadrature with order doubling.

    Integrates ``f`` over the panels defined by ``edges``, doubling the
    per-panel order until two successive estimates agree to ``rel_tol``.
    Returns (value, achieved relative difference).
    """
    a = edges[:-1]
    b = edges[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    last = None
    err = math.inf
    for order in (16, 32, 64, 128):
        nodes, weights = _leggauss(order)
        x = mid[:, None] + half[:, None] * nodes[None, :]
        val = float(np.sum(half[:, None] * weights[None, :] * f(x)))
        if last is not None:
            err = abs(val - last) / max(abs(val), 1e-300)
            if err <= rel_tol:
                return val, err
        last = val
    raise NumericalAccuracyError(
        f"structure-function quadrature did not converge (achieved {err:.3e}, "
        f"target {rel_tol:.3e})",
        achieved=err,
        target=rel_tol,
    )


def theoretical_phase_structure_function(
    dr: float,
    params: TurbulenceParams,
    dz: float,
    q0: float,
    rel_tol: float = 1e-6,
) -> float:
    """Phase structure function D_phi(dr) of a thin layer, rad^2.

    Evaluates 8 pi^2 q0^2 dz * integral_0^inf psi(k) [1 - J0(k dr)] k dk
    by composite Gauss-Legendre quadrature with panels aligned to the
    half-periods of J0 and to the outer-scale knee.

    Parameters
    ----------
    dr : float
        Separation, m. Must be > 0.
    params : TurbulenceParams
    dz : float
        Layer thickness, m.
    q0 : float
        Central wavenumber, 1/m.
    rel_tol : float
        Relative convergence target; non-convergence raises
        NumericalAccuracyError with the achieved tolerance.
    """
    if not dr > 0.0:
        raise ParameterDomainError(f"separation must be > 0, got {dr}")
    if not dz > 0.0:
        raise ParameterDomainError(f"layer thickness must be > 0, got {dz}")
    if params.cn2 == 0.0:
        return 0.0
    # the Gaussian cutoff kills the integrand beyond ~6.5/l0'
    k_hi = 6.5 / params.l0_reduced
    knee = 1.0 / params.L0
    edges = [0.0]
    # geometric ladder bounds the multiplicative width of every panel
    # across the power-law decay
    e = min(0.1 * knee, 0.1 * k_hi)
    while e < k_hi:
        edges.append(e)
        e *= math.sqrt(10.0)
    half_period = math.pi / dr
    n_osc = int(k_hi / half_period)
    if n_osc >= 1:
        step = half_period
        if n_osc > 8192:  # bound the panel count; order doubling covers the rest
            step = k_hi / 8192
        edges.extend(np.arange(step, k_hi, step).tolist())
    edges.append(k_hi)
    edges = np.unique(np.asarray(edges, dtype=float))

    def integrand(k):
        return von_karman_psd(k, params) * (1.0 - j0(k * dr)) * k

    val, _ = _composite_gauss(integrand, edges, rel_tol)
    return 8.0 * math.pi ** 2 * q0 * q0 * dz * val


def beam_tilt_phase_variance(
    r0: float,
    params: TurbulenceParams,
    dz: float,
    q0: float,
    rel_tol: float = 1e-6,
) -> float:
    """Variance, rad^2, of the tilt phase across the beam radius for one layer.

    The layer's phase gradient is averaged over the Gaussian intensity
    profile of a beam of radius r0 (spectral filter exp(-k^2 r0^2 / 4));
    the returned value is the mean-square phase difference that this
    smoothed tilt produces across one beam radius,

        r0^2 * (2 pi)^2 q0^2 dz * integral_0^inf psi(k) k^3 exp(-k^2 r0^2/4) dk.

    Structure below the beam scale redistributes intensity but does not
    displace the centroid; this tilt component is the wander-driving
    part of the layer phase and is the quantity that must stay small
    (< 1 rad^2 per layer) for thin-screen stepping to be valid.
    """
    if not r0 > 0.0:
        raise ParameterDomainError(f"beam radius must be > 0, got {r0}")
    if not dz > 0.0:
        raise ParameterDomainError(f"layer thickness must be > 0, got {dz}")
    if not q0 > 0.0:
        raise ParameterDomainError(f"central wavenumber must be > 0, got {q0}")
    if params.cn2 == 0.0:
        return 0.0
    # Gaussian filter kills the integrand beyond ~24/r0
    k_hi = 24.0 / r0
    edges = [0.0]
    e = min(0.1 / params.L0, 0.1 * k_hi)
    while e < k_hi:
        edges.append(e)
        e *= math.sqrt(10.0)
    edges.append(k_hi)
    edges = np.unique(np.asarray(edges, dtype=float))

    def integrand(k):
        return von_karman_psd(k, params) * k ** 3 * np.exp(-(k * r0) ** 2 / 4.0)

    val, _ = _composite_gauss(integrand, edges, rel_tol)
    return r0 ** 2 * TWO_PI ** 2 * q0 * q0 * dz * val
