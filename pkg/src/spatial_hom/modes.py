"""Transverse Gaussian spatial modes of single photons.

Positions are in mm and transverse momenta in mm^-1 throughout the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DomainError, ResolutionError

# Gaussian tails are negligible beyond this many waists.
QUAD_HALF_WIDTH = 8.0
QUAD_EPSABS = 1e-12


def _require_finite(name: str, value: float) -> None:
    if not math.isfinite(value):
        raise DomainError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class SpatialMode:
    """One photon's transverse mode.

    ``offset_d`` is the signed center of the mode and ``momentum_shift`` its
    signed momentum detuning; the total transverse momentum carried by the
    phase is ``reference_momentum_q + momentum_shift``.
    """

    waist_w0: float
    offset_d: float = 0.0
    momentum_shift: float = 0.0
    reference_momentum_q: float = 0.0

    def __post_init__(self) -> None:
        for name in ("waist_w0", "offset_d", "momentum_shift", "reference_momentum_q"):
            _require_finite(name, getattr(self, name))
        if self.waist_w0 <= 0:
            raise DomainError(f"waist_w0 must be positive, got {self.waist_w0!r}")

    @property
    def center(self) -> float:
        return self.offset_d

    @property
    def momentum(self) -> float:
        """Central transverse momentum of the mode (mm^-1)."""
        return self.reference_momentum_q + self.momentum_shift

    @property
    def amplitude(self) -> float:
        return (2.0 / (math.pi * self.waist_w0**2)) ** 0.25


@dataclass(frozen=True)
class PhotonPairConfig:
    """The two-photon configuration: momentum mismatch Q, half-separation d, waist w0."""

    Q: float = 0.0
    d: float = 0.0
    w0: float = 0.666
    q_ref: float = 0.0

    def __post_init__(self) -> None:
        for name in ("Q", "d", "w0", "q_ref"):
            _require_finite(name, getattr(self, name))
        if self.w0 <= 0:
            raise DomainError(f"w0 must be positive, got {self.w0!r}")

    def modes(self) -> tuple[SpatialMode, SpatialMode]:
        """Expand into the modes entering ports 1 and 2.

        Port 1 is centered at +d with momentum q_ref - Q/2, port 2 at -d with
        q_ref + Q/2, so that Q is the momentum difference q20 - q10.
        """
        m1 = SpatialMode(self.w0, self.d, -0.5 * self.Q, self.q_ref)
        m2 = SpatialMode(self.w0, -self.d, 0.5 * self.Q, self.q_ref)
        return m1, m2


def eval_chi(mode: SpatialMode, y):
    """Evaluate the position-space amplitude chi(y).

    Accepts a scalar or an array of positions and returns a complex value of
    the same shape.
    """
    y_arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(y_arr)):
        raise DomainError("positions must be finite")
    u = y_arr - mode.center
    out = mode.amplitude * np.exp(-(u**2) / mode.waist_w0**2 + 1j * mode.momentum * u)
    if out.ndim == 0:
        return complex(out)
    return out


def _check_uniform(grid: np.ndarray, name: str) -> float:
    if grid.ndim != 1 or grid.size < 3:
        raise ResolutionError(f"{name} must be a 1-D grid with at least 3 points")
    steps = np.diff(grid)
    step = float(steps.mean())
    if step <= 0 or not np.allclose(steps, step, rtol=1e-9, atol=0.0):
        raise ResolutionError(f"{name} must be uniform and strictly increasing")
    return step


def position_grid(mode: SpatialMode, max_momentum: float, nyquist_margin: float = 4.0) -> np.ndarray:
    """Uniform y grid over +-8 w0 around the mode center.

    The step keeps the Nyquist momentum at least ``nyquist_margin`` times
    ``max_momentum`` and never exceeds w0/8.
    """
    w0 = mode.waist_w0
    k_max = max(abs(max_momentum), abs(mode.momentum) + 6.0 / w0)
    step = min(math.pi / (nyquist_margin * k_max), w0 / 8.0)
    n_half = int(math.ceil(QUAD_HALF_WIDTH * w0 / step))
    return mode.center + step * np.arange(-n_half, n_half + 1)


def chi_to_zeta(mode: SpatialMode, q_grid) -> np.ndarray:
    """Momentum-space amplitude zeta(q) sampled on ``q_grid``.

    Uses zeta(q) = (2 pi)^-1/2 int chi(y) exp(-i q y) dy, so a mode with
    total momentum k has |zeta| peaked at q = k. The integral is a direct
    uniform-grid sum taken relative to the mode center, with the center's
    phase e^{-i q c} restored analytically.
    """
    q = np.asarray(q_grid, dtype=float)
    dq = _check_uniform(q, "q_grid")
    w0 = mode.waist_w0
    k0 = mode.momentum
    if q[0] > k0 - 6.0 / w0 or q[-1] < k0 + 6.0 / w0:
        raise ResolutionError(
            f"q_grid [{q[0]:g}, {q[-1]:g}] must cover +-6/w0 around the mode momentum {k0:g}"
        )
    if dq > 1.0 / w0:
        raise ResolutionError(f"q_grid step {dq:g} exceeds 1/w0 = {1.0 / w0:g}")

    y = position_grid(mode, float(np.max(np.abs(q))))
    dy = y[1] - y[0]
    u = y - mode.center
    chi = eval_chi(mode, y)
    kernel = np.exp(-1j * np.outer(q, u))
    return np.exp(-1j * q * mode.center) * (kernel @ chi) * dy / math.sqrt(2.0 * math.pi)


def zeta_to_chi(q_grid, zeta, y) -> np.ndarray:
    """Inverse of :func:`chi_to_zeta`: chi(y) = (2 pi)^-1/2 int zeta(q) e^{i q y} dq."""
    q = np.asarray(q_grid, dtype=float)
    dq = _check_uniform(q, "q_grid")
    z = np.asarray(zeta, dtype=complex)
    y_arr = np.atleast_1d(np.asarray(y, dtype=float))
    return (np.exp(1j * np.outer(y_arr, q)) @ z) * dq / math.sqrt(2.0 * math.pi)


def analytic_zeta(mode: SpatialMode, q) -> np.ndarray:
    """Closed-form transform of a Gaussian mode (used as a cross-check)."""
    q = np.asarray(q, dtype=float)
    w0 = mode.waist_w0
    pref = mode.amplitude * w0 / math.sqrt(2.0)
    return pref * np.exp(-((q - mode.momentum) ** 2) * w0**2 / 4.0 - 1j * q * mode.center)


def mode_overlap(a: SpatialMode, b: SpatialMode) -> complex:
    """<a|b> = int conj(chi_a) chi_b dy by adaptive Gauss-Kronrod quadrature."""
    w = max(a.waist_w0, b.waist_w0)
    lo = min(a.center, b.center) - QUAD_HALF_WIDTH * w
    hi = max(a.center, b.center) + QUAD_HALF_WIDTH * w

    def integrand(y: float) -> complex:
        return np.conj(eval_chi(a, y)) * eval_chi(b, y)

    re, _ = integrate.quad(lambda y: integrand(y).real, lo, hi,
                           epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)
    im, _ = integrate.quad(lambda y: integrand(y).imag, lo, hi,
                           epsabs=QUAD_EPSABS, epsrel=1e-12, limit=400)
    return complex(re, im)


def norm(mode: SpatialMode) -> float:
    """Quadrature of |chi|^2 over +-8 w0."""
    w0 = mode.waist_w0
    val, _ = integrate.quad(lambda y: abs(eval_chi(mode, y)) ** 2,
                            mode.center - QUAD_HALF_WIDTH * w0,
                            mode.center + QUAD_HALF_WIDTH * w0,
                            epsabs=QUAD_EPSABS, epsrel=1e-12)
    return val
