"""Resolved and bucket detection, scan geometries and Poissonian count sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ApertureError, DomainError, SamplingOverflowError, ShapeError
from .interference import (
    InterferenceModel,
    coincidence_rate,
    g2_permanent,
    joint_density,
    p_joint_analytic,
)
from .modes import PhotonPairConfig

APERTURES = ("point", "gaussian", "tophat")
KINDS = ("analytic", "permanent", "sampled")
# Axes measured in mm contribute to the bin measure; a Q axis does not.
POSITION_AXES = ("y3", "y4", "delta")
MAX_EXPECTED_PER_BIN = 1e9
# Fringes count as under-resolved when the aperture exceeds this fraction of the period.
RESOLVED_FRACTION = 0.2
APERTURE_ORDER = 7


def clean_axis(nodes: np.ndarray) -> np.ndarray:
    """Round accumulated float error off grid nodes so that e.g. 0.05 * 25 prints as 1.25."""
    return np.round(nodes, 12) + 0.0


@dataclass(frozen=True)
class DetectionGrid:
    """Raster positions shared by both output ports.

    For the gaussian aperture ``collection_width_wR`` is the 1/e^2 intensity
    radius of the collection mode (weight exp(-2 u^2 / wR^2)); for the tophat it
    is the full width.
    """

    y_min: float = -1.25
    y_max: float = 1.25
    step: float = 0.05
    collection_width_wR: float = 0.05
    aperture: str = "gaussian"

    def __post_init__(self) -> None:
        for name in ("y_min", "y_max", "step", "collection_width_wR"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not self.y_min < self.y_max:
            raise DomainError("y_min must be smaller than y_max")
        if self.step <= 0:
            raise DomainError("step must be positive")
        if self.collection_width_wR < 0:
            raise DomainError("collection_width_wR must be non-negative")
        if self.aperture not in APERTURES:
            raise DomainError(f"aperture must be one of {APERTURES}, got {self.aperture!r}")
        n = (self.y_max - self.y_min) / self.step
        if abs(n - round(n)) > 1e-6:
            raise DomainError("scan range must be an integer number of steps")

    @property
    def effective_width(self) -> float:
        return 0.0 if self.aperture == "point" else self.collection_width_wR

    def nodes(self) -> np.ndarray:
        n = int(round((self.y_max - self.y_min) / self.step))
        return clean_axis(self.y_min + self.step * np.arange(n + 1))


@dataclass(eq=False)
class JointDistribution:
    """Non-negative values on a uniform grid with axis labels and provenance.

    ``axis_names`` is ``("y3", "y4")`` for resolved scans, ``("delta",)`` for
    tandem scans and ``("Q",)`` for dip scans. ``reference`` keeps the values a
    sampled distribution was drawn from.
    """

    axes: tuple[np.ndarray, ...]
    values: np.ndarray
    kind: str
    axis_names: tuple[str, ...]
    meta: dict[str, Any] = field(default_factory=dict)
    reference: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        self.axis_names = tuple(self.axis_names)
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if len(self.axes) != len(self.axis_names):
            raise ShapeError("one name per axis is required")
        shape = tuple(a.size for a in self.axes)
        values = np.asarray(self.values)
        if values.shape != shape:
            raise ShapeError(f"values shape {values.shape} does not match axes {shape}")
        for name, a in zip(self.axis_names, self.axes):
            if a.ndim != 1 or a.size < 2:
                raise ShapeError(f"axis {name} must be 1-D with at least 2 nodes")
            steps = np.diff(a)
            if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-12):
                raise DomainError(f"axis {name} must be strictly increasing and uniform")
        if self.kind == "sampled":
            if not np.issubdtype(values.dtype, np.integer):
                raise DomainError("sampled distributions carry integer counts")
        else:
            values = values.astype(float)
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise DomainError("values must be finite and non-negative")
        self.values = values

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    @property
    def bin_area(self) -> float:
        area = 1.0
        for name, step in zip(self.axis_names, self.steps):
            if name in POSITION_AXES:
                area *= step
        return area


def _aperture_rule(grid: DetectionGrid) -> tuple[np.ndarray, np.ndarray]:
    """Offsets and normalized weights of the 1-D aperture average."""
    w = grid.effective_width
    if w == 0.0:
        return np.zeros(1), np.ones(1)
    if grid.aperture == "gaussian":
        # Gauss-Hermite is exact for the Gaussian weight itself.
        x, wt = np.polynomial.hermite.hermgauss(APERTURE_ORDER)
        return x * (w / math.sqrt(2.0)), wt / math.sqrt(math.pi)
    x, wt = np.polynomial.legendre.leggauss(APERTURE_ORDER)
    return 0.5 * w * x, 0.5 * wt


def _point_density(model: InterferenceModel, y3: np.ndarray, y4: np.ndarray) -> np.ndarray:
    if model.unitary.is_balanced_splitter():
        return np.asarray(p_joint_analytic(model, y3, y4), dtype=float)
    return np.asarray(g2_permanent(model, y3, y4), dtype=float)


def _kind(model: InterferenceModel) -> str:
    return "analytic" if model.unitary.is_balanced_splitter() else "permanent"


def detected_density(model: InterferenceModel, y3, y4, grid: DetectionGrid) -> np.ndarray:
    """Joint density averaged over the collection aperture of each detector."""
    y3, y4 = np.broadcast_arrays(np.asarray(y3, dtype=float), np.asarray(y4, dtype=float))
    if grid.effective_width > grid.y_max - grid.y_min:
        raise ApertureError("collection width exceeds the scan range")
    u, wt = _aperture_rule(grid)
    if u.size == 1:
        return _point_density(model, y3, y4)
    out = np.zeros(y3.shape)
    for ua, wa in zip(u, wt):
        for ub, wb in zip(u, wt):
            out += wa * wb * _point_density(model, y3 + ua, y4 + ub)
    return out


def _scan_meta(model: InterferenceModel, grid: DetectionGrid) -> dict[str, Any]:
    pair = model.pair
    meta: dict[str, Any] = {
        "Q": pair.Q, "d": pair.d, "w0": pair.w0, "q_ref": pair.q_ref,
        "V": model.visibility_V,
        "aperture": grid.aperture, "collection_width_wR": grid.collection_width_wR,
        "warnings": [],
    }
    w = grid.effective_width
    if w > 0 and pair.Q != 0 and w > RESOLVED_FRACTION * (2 * math.pi / abs(pair.Q)):
        meta["warnings"].append(
            f"collection width {w:g} mm under-resolves fringes of period "
            f"{2 * math.pi / abs(pair.Q):g} mm"
        )
    return meta


def resolved_scan(model: InterferenceModel, grid: DetectionGrid) -> JointDistribution:
    """Rasterized joint density over the (y3, y4) grid."""
    y = grid.nodes()
    y3, y4 = np.meshgrid(y, y, indexing="ij")
    values = detected_density(model, y3, y4, grid)
    return JointDistribution((y, y.copy()), values, _kind(model), ("y3", "y4"),
                             meta=_scan_meta(model, grid))


def tandem_scan(model: InterferenceModel, grid: DetectionGrid) -> JointDistribution:
    """Detectors moved in opposite directions so that y3 + y4 = 0.

    Detector 4 steps over the grid nodes and detector 3 mirrors it, so the
    difference coordinate delta = y4 - y3 = 2 y4 advances by twice the grid
    step. For a balanced splitter with point apertures the result equals
    ``meta['delta_scale'] * p_joint_delta``.
    """
    y4 = grid.nodes()
    delta = 2.0 * y4
    values = detected_density(model, -y4, y4, grid)
    meta = _scan_meta(model, grid)
    if model.unitary.is_balanced_splitter():
        meta["delta_scale"] = 2.0 / (math.sqrt(math.pi) * model.pair.w0)
    return JointDistribution((delta,), values, _kind(model), ("delta",), meta=meta)


def _panels(lo: float, hi: float, h: float, order: int = 10) -> tuple[np.ndarray, np.ndarray]:
    n = max(1, int(math.ceil((hi - lo) / h)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def bucket_rate(model: InterferenceModel, aperture_size_Y: float) -> float:
    """Integral of the joint density over the square [-Y/2, Y/2]^2.

    Composite Gauss-Legendre, with panels short against both the waist and
    the fringe period. The region where the density is negligible is clipped.
    """
    if not (aperture_size_Y > 0 and math.isfinite(aperture_size_Y)):
        raise DomainError("aperture_size_Y must be positive and finite")
    pair = model.pair
    reach = abs(pair.d) + 10.0 * pair.w0
    lo = max(-0.5 * aperture_size_Y, -reach)
    hi = min(0.5 * aperture_size_Y, reach)
    if lo >= hi:
        return 0.0
    h = pair.w0 / 4.0
    if pair.Q != 0:
        h = min(h, math.pi / abs(pair.Q) / 2.0)
    x, w = _panels(lo, hi, h)
    y3, y4 = np.meshgrid(x, x, indexing="ij")
    return float(w @ _point_density(model, y3, y4) @ w)


def dip_scan(pair: PhotonPairConfig, V: float, Q_values) -> np.ndarray:
    """Bucket coincidence rate versus Q at the pair's fixed d and w0.

    Returns an (n, 2) array of (Q, rate) rows.
    """
    Q = np.asarray(Q_values, dtype=float).ravel()
    if not np.all(np.isfinite(Q)):
        raise DomainError("Q values must be finite")
    if not (0.0 <= V <= 1.0):
        raise DomainError(f"V must lie in [0, 1], got {V!r}")
    return np.column_stack([Q, coincidence_rate(Q, pair.d, pair.w0, V)])


def dip_distribution(pair: PhotonPairConfig, V: float, Q_values) -> JointDistribution:
    rows = dip_scan(pair, V, Q_values)
    meta = {"d": pair.d, "w0": pair.w0, "q_ref": pair.q_ref, "V": V, "warnings": []}
    return JointDistribution((rows[:, 0],), rows[:, 1], "analytic", ("Q",), meta=meta)


def bin_generator(seed: int, index: int) -> np.random.Generator:
    """Independent RNG substream for one bin, fixed by (seed, bin index)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def sample_counts(dist: JointDistribution, pairs_per_bin_scale: float, seed: int) -> JointDistribution:
    """Draw Poisson counts with mean ``scale * value * bin_area`` for every bin.

    Each bin has its own substream, so the result depends only on ``seed``
    and the bin's flat (C-order) index.
    """
    if dist.kind == "sampled":
        raise DomainError("cannot resample an already sampled distribution")
    if not (pairs_per_bin_scale > 0 and math.isfinite(pairs_per_bin_scale)):
        raise DomainError("pairs_per_bin_scale must be positive and finite")
    seed = int(seed)
    if seed < 0:
        raise DomainError("seed must be non-negative")
    lam = pairs_per_bin_scale * dist.values * dist.bin_area
    if np.any(lam > MAX_EXPECTED_PER_BIN):
        raise SamplingOverflowError(
            f"expected count per bin {lam.max():.3g} exceeds {MAX_EXPECTED_PER_BIN:.0e}"
        )
    flat = lam.ravel()
    counts = np.zeros(flat.size, dtype=np.int64)
    for i, mean in enumerate(flat):
        if mean > 0:
            counts[i] = bin_generator(seed, i).poisson(mean)
    meta = dict(dist.meta)
    meta.update(seed=seed, pairs_per_bin_scale=pairs_per_bin_scale,
                expected_total=float(flat.sum()), source_kind=dist.kind)
    return JointDistribution(dist.axes, counts.reshape(lam.shape), "sampled", dist.axis_names,
                             meta=meta, reference=dist.values.copy())
