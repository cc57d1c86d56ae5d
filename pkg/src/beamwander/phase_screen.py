"""Random phase screens: turbulence layers and source partial coherence.

Turbulence screens are synthesized by Fourier filtering of white
Gaussian noise against the thin-screen phase spectral density
F_phi(kappa) = 2 pi q0^2 dz psi(kappa), augmented with 3x3 subharmonic
patches so that outer-scale power below the grid's frequency spacing is
represented.  The subharmonic depth adapts to Delta_kappa * L0 so the
represented band always reaches the outer-scale knee; each level's 3x3
cells exactly tile the previous level's central cell, so no frequency
region is double counted.

Source partial-coherence screens are Gaussian-correlated Gaussian phase
fields chosen so that the ensemble coherence factor
<exp(i[phi(r) - phi(r')])> = exp(-D_phi/2) reproduces the Schell-type
degradation exp(-|r-r'|^2/lambda_c^2) for separations up to ~2 lambda_c
while the mean-square phase gradient <|grad phi|^2> = 4/lambda_c^2
reproduces the partially coherent far-field divergence exactly in the
ensemble mean.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
import pathlib
import warnings

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .exceptions import (
    DegenerateInputError,
    InputMismatchError,
    ParameterDomainError,
    ResolutionError,
    ResolutionWarning,
)
from .spectra import TWO_PI, TurbulenceParams, phase_psd

ROLE_TURBULENCE = "turbulence-layer"
ROLE_SOURCE = "source-coherence"

SUBHARMONIC_MIN_LEVELS = 3
SUBHARMONIC_MAX_LEVELS = 12

#: Source screen correlation cell ell = COHERENCE_CELL_FACTOR * lambda_c.
#: With sigma = ell/lambda_c =: m the coherence factor exp(-D_phi/2)
#: deviates from the Schell-model Gaussian by exp(8/m^2) - 1 at
#: separation 2 lambda_c (quartic term of the Gaussian covariance);
#: m = 24 keeps that under 1.5%, and the mean-square phase gradient
#: 4/lambda_c^2 is independent of m.
COHERENCE_CELL_FACTOR = 24.0
_SOURCE_OVERSAMPLE = 8  # auxiliary synthesis pitch = ell / 8

_SCREEN_MAGIC = b"PHSCRN01"


@dataclasses.dataclass(frozen=True)
class SimGrid:
    """Square transverse sampling lattice.

    Parameters
    ----------
    n : int
        Points per side; power of two, >= 64.
    dx : float
        Pitch, m.
    """

    n: int
    dx: float

    def __post_init__(self):
        if self.n < 64 or (self.n & (self.n - 1)) != 0:
            raise ParameterDomainError(
                f"grid size must be a power of two >= 64, got {self.n}"
            )
        if not (self.dx > 0.0 and math.isfinite(self.dx)):
            raise ParameterDomainError(f"grid pitch must be finite and > 0, got {self.dx}")

    @property
    def window(self) -> float:
        """Physical side length n * dx, m."""
        return self.n * self.dx

    def coords(self) -> np.ndarray:
        """Centered 1-D sample coordinates, m."""
        return _grid_coords(self.n, self.dx)

    def kmag(self) -> np.ndarray:
        """Angular spatial frequency magnitudes on the FFT lattice, 1/m."""
        return _grid_kmag(self.n, self.dx)


@functools.lru_cache(maxsize=64)
def _grid_coords(n: int, dx: float) -> np.ndarray:
    c = (np.arange(n) - n // 2) * dx
    c.flags.writeable = False
    return c


@functools.lru_cache(maxsize=64)
def _grid_kmag(n: int, dx: float) -> np.ndarray:
    k1 = TWO_PI * np.fft.fftfreq(n, d=dx)
    kk = np.hypot(k1[:, None], k1[None, :])
    kk.flags.writeable = False
    return kk


def effective_r1(r0: float, lambda_c: float) -> float:
    """Effective source radius r1 from aperture r0 and coherence length.

    r1^2 = r0^2 / (1 + 2 r0^2 / lambda_c^2); r1 = r0 iff lambda_c = inf.
    """
    if not r0 > 0.0:
        raise ParameterDomainError(f"aperture radius must be > 0, got {r0}")
    if not lambda_c > 0.0:
        raise ParameterDomainError(f"coherence length must be > 0, got {lambda_c}")
    if math.isinf(lambda_c):
        return r0
    return r0 / math.sqrt(1.0 + 2.0 * r0 * r0 / (lambda_c * lambda_c))


def lambda_c_for_ratio(r0: float, ratio: float) -> float:
    """Coherence length giving a target r1^2/r0^2 ratio (inverse of effective_r1)."""
    if not r0 > 0.0:
        raise ParameterDomainError(f"aperture radius must be > 0, got {r0}")
    if not 0.0 < ratio <= 1.0:
        raise ParameterDomainError(f"r1^2/r0^2 ratio must be in (0, 1], got {ratio}")
    if ratio == 1.0:
        return math.inf
    return r0 * math.sqrt(2.0 * ratio / (1.0 - ratio))


@dataclasses.dataclass(frozen=True)
class SourceParams:
    """Gaussian source aperture with optional partial coherence.

    lambda_c = inf is the coherent source and is represented explicitly
    (no screen is applied) rather than by a large finite number.
    """

    r0: float
    q0: float
    lambda_c: float = math.inf

    def __post_init__(self):
        if not (self.r0 > 0.0 and math.isfinite(self.r0)):
            raise ParameterDomainError(f"aperture radius must be > 0, got {self.r0}")
        if not (self.q0 > 0.0 and math.isfinite(self.q0)):
            raise ParameterDomainError(f"central wavenumber must be > 0, got {self.q0}")
        if not self.lambda_c > 0.0:
            raise ParameterDomainError(
                f"coherence length must be > 0 (inf allowed), got {self.lambda_c}"
            )

    @property
    def r1(self) -> float:
        """Effective radius from the coherence length."""
        return effective_r1(self.r0, self.lambda_c)

    @property
    def coherent(self) -> bool:
        return math.isinf(self.lambda_c)


@dataclasses.dataclass(frozen=True, eq=False)
class PhaseScreen:
    """One realization of a 2-D phase field, rad, on a SimGrid.

    Axis convention: values[i, j] is the phase at x = coords[i],
    y = coords[j].
    """

    grid: SimGrid
    values: np.ndarray
    role: str
    seed: object = None


def _subharmonic_levels(dkappa: float, L0: float) -> int:
    """Subharmonic depth so the sampled band reaches the outer-scale knee.

    Level p has spacing dkappa / 3^p; depth is chosen so the deepest
    spacing is at or below 1/L0, clamped to [3, 12].
    """
    need = math.ceil(math.log(max(dkappa * L0, 1.0)) / math.log(3.0))
    return int(min(max(need, SUBHARMONIC_MIN_LEVELS), SUBHARMONIC_MAX_LEVELS))


@functools.lru_cache(maxsize=16)
def _turbulence_amplitude(
    grid: SimGrid, params: TurbulenceParams, dz: float, q0: float
) -> np.ndarray:
    """Per-mode amplitude lattice sqrt(F_phi(kappa_j)) * dk (midpoint rule).

    Midpoint sampling of the convex PSD leaves the known few-percent
    structure-function deficit of this synthesis family at large
    separations; cell-integrated power was tried and rejected because
    lumping a cell's power at its center overweights the near-DC cells
    by far more than the midpoint deficit.
    """
    dk = TWO_PI / grid.window
    psd = phase_psd(grid.kmag(), params, dz, q0)
    psd[0, 0] = 0.0  # DC cell is tiled by the subharmonic levels
    amp = np.sqrt(psd) * dk
    amp.flags.writeable = False
    return amp


@functools.lru_cache(maxsize=16)
def _subharmonic_amplitudes(
    grid: SimGrid, params: TurbulenceParams, dz: float, q0: float, levels: int
) -> tuple:
    """(spacing, 3x3 amplitude) per level; each level tiles the cell above."""
    dk = TWO_PI / grid.window
    offsets = np.array([-1.0, 0.0, 1.0])
    out = []
    for p in range(1, levels + 1):
        dkp = dk / 3.0 ** p
        kxs = offsets * dkp
        kmag = np.hypot(kxs[:, None], kxs[None, :])
        amp = np.sqrt(phase_psd(kmag, params, dz, q0)) * dkp
        amp[1, 1] = 0.0  # central cell handled by the next level
        amp.flags.writeable = False
        out.append((dkp, amp))
    return tuple(out)


def generate_turbulence_screen(
    grid: SimGrid,
    params: TurbulenceParams,
    dz: float,
    q0: float,
    seed=None,
    subharmonic_levels: int | None = None,
) -> PhaseScreen:
    """Zero-mean Gaussian phase screen for a turbulent layer of thickness dz.

    Parameters
    ----------
    grid : SimGrid
    params : TurbulenceParams
    dz : float
        Layer thickness, m.
    q0 : float
        Central wavenumber, 1/m.
    seed : int, SeedSequence or None
        Reproducibility token; identical inputs and seed give a
        bit-identical screen.
    subharmonic_levels : int, optional
        Override the adaptive subharmonic depth (testing hook).
    """
    if grid.dx > params.l0:
        warnings.warn(
            ResolutionWarning(
                f"grid pitch {grid.dx:g} m exceeds inner scale {params.l0:g} m; "
                "sub-inner-scale phase content is absent",
                dx=grid.dx,
                l0=params.l0,
            ),
            stacklevel=2,
        )
    if params.cn2 == 0.0:
        return PhaseScreen(
            grid=grid,
            values=np.zeros((grid.n, grid.n)),
            role=ROLE_TURBULENCE,
            seed=seed,
        )

    rng = np.random.default_rng(seed)
    n = grid.n
    dk = TWO_PI / grid.window

    noise = rng.standard_normal((2, n, n))
    modes = (noise[0] + 1j * noise[1]) * _turbulence_amplitude(grid, params, dz, q0)
    phi = (n * n) * np.fft.ifft2(modes).real

    levels = (
        _subharmonic_levels(dk, params.L0)
        if subharmonic_levels is None
        else subharmonic_levels
    )
    if levels > 0:
        sub_noise = rng.standard_normal((levels, 3, 3, 2))
        x = grid.coords()
        for p, (dkp, amp) in enumerate(
            _subharmonic_amplitudes(grid, params, dz, q0, levels)
        ):
            kxs = np.array([-dkp, 0.0, dkp])
            coef = (sub_noise[p, :, :, 0] + 1j * sub_noise[p, :, :, 1]) * amp
            ex = np.exp(1j * x[:, None] * kxs[None, :])
            for j in range(3):
                row = (
                    coef[j, 0] * ex[:, 0]
                    + coef[j, 1] * ex[:, 1]
                    + coef[j, 2] * ex[:, 2]
                )
                phi += (ex[:, j][:, None] * row[None, :]).real

    return PhaseScreen(grid=grid, values=phi, role=ROLE_TURBULENCE, seed=seed)


def generate_source_coherence_screen(grid: SimGrid, lambda_c: float, seed=None) -> PhaseScreen:
    """Source partial-coherence phase screen with correlation length lambda_c.

    The screen is synthesized on an auxiliary coarse grid matched to the
    correlation cell ell = 24 lambda_c (Gaussian covariance
    sigma^2 exp(-rho^2/ell^2), sigma = ell/lambda_c) and interpolated to
    the target grid with a bicubic spline.  lambda_c = inf returns an
    explicitly flagged all-zero screen.
    """
    if not lambda_c > 0.0:
        raise ParameterDomainError(f"coherence length must be > 0, got {lambda_c}")
    if math.isinf(lambda_c):
        return PhaseScreen(
            grid=grid,
            values=np.zeros((grid.n, grid.n)),
            role=ROLE_SOURCE,
            seed=seed,
        )
    if lambda_c < 4.0 * grid.dx:
        raise ResolutionError(
            f"coherence length {lambda_c:g} m needs a pitch <= lambda_c/4; "
            f"grid has dx = {grid.dx:g} m"
        )

    ell = COHERENCE_CELL_FACTOR * lambda_c
    sigma2 = COHERENCE_CELL_FACTOR ** 2
    dxc = ell / _SOURCE_OVERSAMPLE
    needed = max(grid.window + 4.0 * dxc, 8.0 * ell)
    nc = max(64, 1 << math.ceil(math.log2(needed / dxc)))
    aux = SimGrid(n=nc, dx=dxc)

    rng = np.random.default_rng(seed)
    kk = aux.kmag()
    psd = sigma2 * (ell * ell / (4.0 * math.pi)) * np.exp(-(kk * ell) ** 2 / 4.0)
    psd[0, 0] = 0.0
    dk = TWO_PI / aux.window
    noise = rng.standard_normal((2, nc, nc))
    modes = (noise[0] + 1j * noise[1]) * np.sqrt(psd) * dk
    phi_aux = (nc * nc) * np.fft.ifft2(modes).real

    spline = RectBivariateSpline(aux.coords(), aux.coords(), phi_aux, kx=3, ky=3)
    c = grid.coords()
    values = spline(c, c)
    return PhaseScreen(grid=grid, values=values, role=ROLE_SOURCE, seed=seed)


@dataclasses.dataclass(frozen=True, eq=False)
class StructureFunctionTable:
    """Radially averaged empirical structure function with standard errors."""

    separation: np.ndarray
    d_phi: np.ndarray
    se: np.ndarray
    n_screens: int


def screen_structure_function(screens, max_lag: int | None = None) -> StructureFunctionTable:
    """Empirical phase structure function of a screen ensemble.

    Averages [phi(r + s) - phi(r)]^2 over both grid axes and the
    ensemble for axis-aligned separations s = lag * dx.  Accepts any
    iterable of PhaseScreen (streamed; the ensemble is never
    materialized).  Requires >= 100 screens on a common grid.
    """
    grid = None
    sums = None
    sq_sums = None
    count = 0
    lags = None
    for screen in screens:
        if grid is None:
            grid = screen.grid
            top = max_lag if max_lag is not None else grid.n // 8
            if not 1 <= top < grid.n:
                raise ParameterDomainError(f"max_lag must be in [1, n), got {top}")
            lags = np.arange(1, top + 1)
            sums = np.zeros(len(lags))
            sq_sums = np.zeros(len(lags))
        elif screen.grid != grid:
            raise InputMismatchError(
                f"mixed grids in ensemble: {screen.grid} vs {grid}"
            )
        v = screen.values
        per_screen = np.empty(len(lags))
        for i, lag in enumerate(lags):
            dx_diff = v[lag:, :] - v[:-lag, :]
            dy_diff = v[:, lag:] - v[:, :-lag]
            per_screen[i] = 0.5 * (np.mean(dx_diff * dx_diff) + np.mean(dy_diff * dy_diff))
        sums += per_screen
        sq_sums += per_screen * per_screen
        count += 1
    if count < 100:
        raise DegenerateInputError(
            f"structure-function estimate needs >= 100 screens, got {count}"
        )
    mean = sums / count
    var = np.maximum(sq_sums / count - mean * mean, 0.0)
    se = np.sqrt(var / count)
    return StructureFunctionTable(
        separation=lags * grid.dx, d_phi=mean, se=se, n_screens=count
    )


def write_screen(screen: PhaseScreen, path, header_extra: dict | None = None) -> None:
    """Dump a screen: magic, length-prefixed JSON header, raw float64 values.

    A human-readable text sidecar is written next to the binary at
    ``path`` + ".txt".
    """
    path = pathlib.Path(path)
    header = {
        "n": screen.grid.n,
        "dx": screen.grid.dx,
        "role": screen.role,
        "seed": repr(screen.seed),
    }
    if header_extra:
        header.update(header_extra)
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_SCREEN_MAGIC)
        fh.write(len(blob).to_bytes(4, "little"))
        fh.write(blob)
        fh.write(np.ascontiguousarray(screen.values, dtype=np.float64).tobytes())
    lines = [f"{key} = {header[key]}" for key in sorted(header)]
    pathlib.Path(str(path) + ".txt").write_text("\n".join(lines) + "\n")


def read_screen(path) -> tuple[PhaseScreen, dict]:
    """Read a screen dump written by write_screen; returns (screen, header)."""
    raw = pathlib.Path(path).read_bytes()
    if raw[: len(_SCREEN_MAGIC)] != _SCREEN_MAGIC:
        raise InputMismatchError(f"{path} is not a screen dump (bad magic)")
    off = len(_SCREEN_MAGIC)
    hlen = int.from_bytes(raw[off : off + 4], "little")
    off += 4
    header = json.loads(raw[off : off + hlen].decode("utf-8"))
    off += hlen
    n = header["n"]
    values = np.frombuffer(raw[off:], dtype=np.float64).reshape(n, n).copy()
    grid = SimGrid(n=n, dx=header["dx"])
    screen = PhaseScreen(grid=grid, values=values, role=header["role"], seed=header["seed"])
    return screen, header
