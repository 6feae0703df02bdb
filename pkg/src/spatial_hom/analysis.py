"""Visibility fits, distribution similarity and fringe metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import optimize
from scipy.interpolate import CubicSpline

from .detection import JointDistribution
from .errors import DomainError, FitError, RankError, ShapeError, StructureError
from .interference import coincidence_rate, delta_density, joint_density

MODEL_KINDS = ("joint2d", "delta", "dip")
MODEL_AXES = {"joint2d": ("y3", "y4"), "delta": ("delta",), "dip": ("Q",)}
MODEL_PARAMS = {
    "joint2d": ("amplitude", "V", "Q", "d", "w0"),
    "delta": ("amplitude", "V", "Q", "d", "w0"),
    "dip": ("amplitude", "V", "d", "w0"),
}
DEFAULT_FIXED = {"d": 0.0, "w0": 0.666}
DEFAULT_INIT = {"V": 0.8, "w0": 0.666}
# d enters only through d^2 and an even cosh, so d = 0 is a stationary point.
DEFAULT_FREE_D = 0.05
V_MAX = 1.05
MAX_ITERATIONS = 500
RANK_RTOL = 1e-7


def similarity(p_exp: JointDistribution, p_th: JointDistribution) -> float:
    """Bhattacharyya-type overlap (sum sqrt(p q))^2 / (sum p sum q) of two distributions."""
    a = np.asarray(p_exp.values, dtype=float)
    b = np.asarray(p_th.values, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    for x, y in zip(p_exp.axes, p_th.axes):
        if x.shape != y.shape or not np.allclose(x, y, rtol=1e-9, atol=1e-12):
            raise ShapeError("distributions are defined on different axes")
    if np.any(a < 0) or np.any(b < 0):
        raise DomainError("distributions must be non-negative")
    sa, sb = a.sum(), b.sum()
    if sa == 0 or sb == 0:
        raise DomainError("distributions must not be identically zero")
    # Normalize first so that tiny or huge values neither underflow nor overflow.
    s = np.sqrt((a / sa) * (b / sb)).sum() ** 2
    return float(min(s, 1.0))


def delta_profile(dist: JointDistribution) -> JointDistribution:
    """Discrete marginal of a (y3, y4) raster along lines of constant delta = y4 - y3."""
    if dist.axis_names != ("y3", "y4"):
        raise ShapeError("delta_profile needs a (y3, y4) distribution")
    s3, s4 = dist.steps
    if not math.isclose(s3, s4, rel_tol=1e-9):
        raise ShapeError("delta_profile needs equal steps on both axes")
    v = np.asarray(dist.values, dtype=float)
    n3, n4 = v.shape
    offsets = np.arange(-(n3 - 1), n4)
    prof = np.array([np.trace(v, offset=k) for k in offsets]) * s3
    delta = (dist.axes[1][0] - dist.axes[0][0]) + offsets * s3
    kind = "analytic" if dist.kind == "sampled" else dist.kind
    return JointDistribution((delta,), prof, kind, ("delta",), meta=dict(dist.meta))


@dataclass
class FringeMetrics:
    period: float
    zero_positions: np.ndarray
    envelope_width: float
    envelope_peak: float


def _runs(v: np.ndarray) -> list[tuple[int, int]]:
    starts = np.flatnonzero(np.r_[True, v[1:] != v[:-1]])
    ends = np.r_[starts[1:], v.size]
    return list(zip(starts.tolist(), ends.tolist()))


def _local_maxima(v: np.ndarray) -> list[int]:
    runs = _runs(v)
    out = []
    for k, (s, e) in enumerate(runs):
        left = runs[k - 1][0] if k > 0 else None
        right = runs[k + 1][0] if k + 1 < len(runs) else None
        if (left is None or v[left] < v[s]) and (right is None or v[right] < v[s]):
            out.append((s + e - 1) // 2)
    return out


def _refine_minimum(x: np.ndarray, v: np.ndarray, m: int) -> float:
    if 0 < m < v.size - 1:
        a, b, c = v[m - 1], v[m], v[m + 1]
        curv = a - 2 * b + c
        if curv > 0:
            return float(x[m] + 0.5 * (a - c) / curv * (x[1] - x[0]))
    return float(x[m])


def _envelope(x: np.ndarray, v: np.ndarray, period: float) -> tuple[float, float]:
    # Triangular average over two periods suppresses the fringe term to second
    # order; its variance period^2 / 6 is removed from the half-width assuming a
    # Gaussian-like envelope.
    step = x[1] - x[0]
    h = min(step / 8.0, period / 64.0)
    xf = np.arange(x[0], x[-1] + 0.5 * h, h)
    vf = np.clip(CubicSpline(x, v)(xf), 0.0, None)
    t = np.arange(-period, period + 0.5 * h, h)
    kern = np.clip(1.0 - np.abs(t) / period, 0.0, None)
    env = np.convolve(vf, kern / kern.sum(), mode="same")
    peak = float(env.max())
    above = np.flatnonzero(env >= 0.5 * peak)
    i, j = above[0], above[-1]

    def crossing(a: int, b: int) -> float:
        if a < 0 or b >= env.size:
            return float(xf[min(max(a, b), env.size - 1)])
        return float(np.interp(0.5 * peak, [env[a], env[b]], [xf[a], xf[b]]))

    left = crossing(i, i - 1) if i > 0 else float(xf[0])
    right = crossing(j, j + 1) if j < env.size - 1 else float(xf[-1])
    half = 0.5 * (right - left)
    corrected = half**2 - 2.0 * math.log(2.0) * period**2 / 6.0
    return (math.sqrt(corrected) if corrected > 0 else half), peak


def fringe_metrics(dist: JointDistribution, floor: float = 1e-3, depth: float = 0.5) -> FringeMetrics:
    """Fringe period, minima positions and envelope half-width of a delta profile.

    Minima are taken between consecutive local maxima that exceed ``floor``
    times the global maximum, and kept only when they drop below ``depth``
    times the lower of the two neighbouring maxima. Sampled data usually needs
    a larger ``floor`` than analytic data to ignore counting noise in the tails.
    """
    if dist.ndim != 1:
        raise ShapeError("fringe_metrics needs a 1-D distribution")
    x = dist.axes[0]
    v = np.asarray(dist.values, dtype=float)
    vmax = float(v.max())
    if vmax <= 0:
        raise StructureError("distribution is identically zero")
    peaks = [p for p in _local_maxima(v) if v[p] >= floor * vmax]
    minima: list[int] = []
    if peaks:
        left = peaks[0]
        for p in peaks[1:]:
            m = left + int(np.argmin(v[left:p + 1]))
            seg = np.flatnonzero(v[left:p + 1] == v[m]) + left
            m = int(seg[(seg.size - 1) // 2])
            if v[m] <= depth * min(v[left], v[p]):
                minima.append(m)
                left = p
            elif v[p] > v[left]:
                left = p
    if len(minima) < 2:
        raise StructureError(f"found {len(minima)} fringe minima, at least 2 are needed")
    zeros = np.array([_refine_minimum(x, v, m) for m in minima])
    period = float((zeros[-1] - zeros[0]) / (zeros.size - 1))
    width, peak = _envelope(x, v, period)
    return FringeMetrics(period, zeros, width, peak)


@dataclass
class FitResult:
    model_kind: str
    params: dict[str, float]
    fixed: dict[str, float]
    residual_rms: float
    iterations: int
    converged: bool
    optimality: float = 0.0
    message: str = ""
    weighting: str = "none"
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def values(self) -> dict[str, float]:
        return {**self.fixed, **self.params}

    def evaluate(self, axes) -> np.ndarray:
        return _model_function(self.model_kind)(axes, self.values)


def _model_function(kind: str) -> Callable[[tuple, dict[str, float]], np.ndarray]:
    if kind == "joint2d":
        def f(axes, p):
            y3, y4 = np.meshgrid(axes[0], axes[1], indexing="ij")
            return p["amplitude"] * joint_density(y3, y4, p["Q"], p["d"], p["w0"], p["V"])
    elif kind == "delta":
        def f(axes, p):
            return p["amplitude"] * delta_density(axes[0], p["Q"], p["d"], p["w0"], p["V"])
    elif kind == "dip":
        def f(axes, p):
            return p["amplitude"] * coincidence_rate(axes[0], p["d"], p["w0"], p["V"])
    else:
        raise DomainError(f"model_kind must be one of {MODEL_KINDS}, got {kind!r}")
    return f


def _softplus(x: float) -> float:
    return float(np.logaddexp(0.0, x))


def _softplus_inv(y: float) -> float:
    return float(y + np.log(-np.expm1(-y)))


def _to_internal(name: str, value: float) -> float:
    if name == "V":
        s = min(max(value / V_MAX, 1e-9), 1.0 - 1e-9)
        return math.log(s / (1.0 - s))
    if name == "w0":
        return _softplus_inv(max(value, 1e-9))
    return float(value)


def _to_external(name: str, u: float) -> float:
    if name == "V":
        return V_MAX / (1.0 + math.exp(-u))
    if name == "w0":
        return _softplus(u)
    return float(u)


def _linear_amplitude(shape: np.ndarray, data: np.ndarray, weights: np.ndarray) -> float:
    den = float(np.sum(weights * shape * shape))
    return float(np.sum(weights * shape * data)) / den if den > 0 else 1.0


def _initial_Q(data: JointDistribution, y: np.ndarray, w: np.ndarray,
               f: Callable, base: dict[str, float]) -> float:
    # Coarse scan over Q with the linear amplitude solved at each point,
    # plus the fringe period estimate when fringes are visible. Q = 0 is left
    # out: the model is even in Q, so the gradient vanishes there.
    step = data.steps[0]
    q_max = math.pi / step
    candidates = list(np.linspace(0.0, q_max, 401)[1:])
    try:
        prof = data if data.axis_names == ("delta",) else delta_profile(data)
        candidates.append(2.0 * math.pi / fringe_metrics(prof).period)
    except (StructureError, ShapeError):
        pass
    best_q, best_sse = 0.0, math.inf
    for q in candidates:
        p = dict(base, Q=float(q), amplitude=1.0)
        shape = f(data.axes, p)
        a = _linear_amplitude(shape, y, w)
        sse = float(np.sum(w * (a * shape - y) ** 2))
        if sse < best_sse:
            best_q, best_sse = float(q), sse
    return best_q


def fit(data: JointDistribution, model_kind: str, init: dict[str, float] | None = None,
        fixed: dict[str, float] | None = None, weighting: str = "none",
        max_iterations: int = MAX_ITERATIONS) -> FitResult:
    """Least-squares fit of a visibility-augmented model to ``data``.

    Parameters not listed in ``fixed`` are fitted; ``fixed`` defaults to
    d = 0 and w0 = 0.666 mm. A multiplicative amplitude is always part of the
    model. ``weighting="poisson"`` divides residuals by sqrt(max(count, 1)).
    The optimizer is a trust-region reflective solver run on transformed
    parameters (logistic V in [0, 1.05], softplus w0).
    """
    f = _model_function(model_kind)
    if data.axis_names != MODEL_AXES[model_kind]:
        raise ShapeError(f"{model_kind} fits need axes {MODEL_AXES[model_kind]}, got {data.axis_names}")
    if weighting not in ("none", "poisson"):
        raise DomainError(f"weighting must be 'none' or 'poisson', got {weighting!r}")
    names = MODEL_PARAMS[model_kind]
    fixed = dict(DEFAULT_FIXED if fixed is None else fixed)
    unknown = set(fixed) - set(names)
    if unknown:
        raise DomainError(f"unknown fixed parameters for {model_kind}: {sorted(unknown)}")
    init = dict(init or {})
    unknown = set(init) - set(names)
    if unknown:
        raise DomainError(f"unknown initial parameters for {model_kind}: {sorted(unknown)}")
    for k, v in {**fixed, **init}.items():
        if not math.isfinite(v):
            raise DomainError(f"parameter {k} must be finite")
    free = [n for n in names if n not in fixed]
    if not free:
        raise FitError("no free parameters")

    y = np.asarray(data.values, dtype=float)
    if not np.any(y > 0):
        raise FitError("degenerate data: all values are zero")
    if y.size < 2 * len(free):
        raise FitError(f"{y.size} data points are too few for {len(free)} free parameters")
    w = 1.0 / np.maximum(y, 1.0) if weighting == "poisson" else np.ones_like(y)
    sqrt_w = np.sqrt(w)

    start = {n: fixed[n] if n in fixed else init.get(n, DEFAULT_INIT.get(n, 0.0)) for n in names}
    if "d" in free and "d" not in init:
        start["d"] = DEFAULT_FREE_D
    if "Q" in free and "Q" not in init:
        start["Q"] = _initial_Q(data, y, w, f, start)
    if "amplitude" in free and "amplitude" not in init:
        start["amplitude"] = _linear_amplitude(f(data.axes, dict(start, amplitude=1.0)), y, w)

    def unpack(u: np.ndarray) -> dict[str, float]:
        p = dict(fixed)
        p.update({n: _to_external(n, ui) for n, ui in zip(free, u)})
        return p

    def residuals(u: np.ndarray) -> np.ndarray:
        return (sqrt_w * (f(data.axes, unpack(u)) - y)).ravel()

    u0 = np.array([_to_internal(n, start[n]) for n in free])
    res = optimize.least_squares(residuals, u0, jac="3-point", method="trf", x_scale="jac",
                                 ftol=1e-15, xtol=1e-15, gtol=1e-15, max_nfev=max_iterations)

    jac = np.asarray(res.jac, dtype=float)
    norms = np.linalg.norm(jac, axis=0)
    if np.any(norms == 0):
        raise RankError("singular normal equations: a parameter does not affect the model")
    sv = np.linalg.svd(jac / norms, compute_uv=False)
    if sv[-1] < RANK_RTOL * sv[0]:
        raise RankError(f"singular normal equations: free parameters {free} are degenerate")

    p = unpack(res.x)
    for n in ("Q", "d"):
        if n in p:
            p[n] = abs(p[n])
    params = {n: p[n] for n in free}
    rms = float(np.sqrt(np.mean(res.fun**2)))
    return FitResult(model_kind, params, dict(fixed), rms, int(res.nfev), bool(res.status > 0),
                     optimality=float(res.optimality), message=str(res.message), weighting=weighting)
