"""Deterministic CSV serialization of joint distributions."""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import numpy as np

from .detection import JointDistribution
from .errors import DomainError

HEADERS = {
    ("y3", "y4"): ["y3_mm", "y4_mm", "p"],
    ("delta",): ["delta_mm", "p"],
    ("Q",): ["Q_per_mm", "rate"],
}


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double exactly."""
    s = format(float(x), ".17g")
    return "0" if s == "-0" else s


def to_csv(dist: JointDistribution) -> str:
    try:
        header = list(HEADERS[dist.axis_names])
    except KeyError:
        raise DomainError(f"no CSV layout for axes {dist.axis_names}") from None
    sampled = dist.kind == "sampled"
    if sampled:
        if dist.reference is None:
            raise DomainError("sampled distribution has no reference values to write")
        header.append("counts")
        p = dist.reference
    else:
        p = dist.values
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    if dist.ndim == 2:
        y3, y4 = dist.axes
        for i in range(y3.size):
            for j in range(y4.size):
                row = [fmt(y3[i]), fmt(y4[j]), fmt(p[i, j])]
                if sampled:
                    row.append(str(int(dist.values[i, j])))
                buf.write(",".join(row) + "\n")
    else:
        (x,) = dist.axes
        for i in range(x.size):
            row = [fmt(x[i]), fmt(p[i])]
            if sampled:
                row.append(str(int(dist.values[i])))
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def write_csv(dist: JointDistribution, path: Path) -> str:
    """Write ``dist`` and return the sha256 of the bytes written."""
    data = to_csv(dist).encode("utf-8")
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def from_csv(text: str) -> JointDistribution:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DomainError("empty CSV")
    header = lines[0].strip().split(",")
    names = None
    for axis_names, cols in HEADERS.items():
        if header in (cols, cols + ["counts"]):
            names = axis_names
    if names is None:
        raise DomainError(f"unrecognized CSV header: {lines[0].strip()}")
    sampled = header[-1] == "counts"
    rows = [ln.split(",") for ln in lines[1:]]
    if any(len(r) != len(header) for r in rows):
        raise DomainError("CSV rows do not match the header")
    n_axes = len(names)
    table = np.array([[float(v) for v in r[:n_axes + 1]] for r in rows])
    counts = np.array([int(r[-1]) for r in rows], dtype=np.int64) if sampled else None

    if n_axes == 2:
        y3 = np.unique(table[:, 0])
        y4 = np.unique(table[:, 1])
        shape = (y3.size, y4.size)
        if table.shape[0] != y3.size * y4.size:
            raise DomainError("2-D CSV is not a complete raster")
        expect3 = np.repeat(y3, y4.size)
        expect4 = np.tile(y4, y3.size)
        if not (np.array_equal(table[:, 0], expect3) and np.array_equal(table[:, 1], expect4)):
            raise DomainError("2-D CSV rows must be ordered by y3, then y4")
        axes = (y3, y4)
    else:
        shape = (table.shape[0],)
        axes = (table[:, 0],)
    p = table[:, n_axes].reshape(shape)
    if sampled:
        return JointDistribution(axes, counts.reshape(shape), "sampled", names, reference=p)
    return JointDistribution(axes, p, "analytic", names)


def read_csv(path: Path) -> JointDistribution:
    return from_csv(Path(path).read_text(encoding="utf-8"))


def distributions_equal(a: JointDistribution, b: JointDistribution) -> bool:
    if a.axis_names != b.axis_names or a.kind != b.kind:
        return False
    if not all(np.array_equal(x, y) for x, y in zip(a.axes, b.axes)):
        return False
    if not np.array_equal(a.values, b.values):
        return False
    if (a.reference is None) != (b.reference is None):
        return False
    return a.reference is None or np.array_equal(a.reference, b.reference)
