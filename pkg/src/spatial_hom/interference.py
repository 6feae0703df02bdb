"""Two-photon joint detection probabilities at a beam splitter.

Two routes are provided. The permanent route evaluates |Perm(Lambda)|^2 for
any 2x2 mode unitary and serves as the ideal-theory reference; the closed-form
route evaluates the Gaussian laws for a balanced splitter and carries the
phenomenological visibility V on its interference term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import DomainError, ShapeError, SizeError, UnsupportedModelError
from .modes import PhotonPairConfig, eval_chi

MAX_PERMANENT_SIZE = 20
UNITARITY_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class ModeUnitary:
    """2x2 input-to-output mode map. ``entries[i, j]`` is U_{i+1, j+3}."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.array(self.entries, dtype=complex)
        if m.shape != (2, 2):
            raise ShapeError(f"mode unitary must be 2x2, got shape {m.shape}")
        if not np.allclose(m.conj().T @ m, np.eye(2), rtol=0.0, atol=UNITARITY_ATOL):
            raise DomainError("mode unitary is not unitary within 1e-12")
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    def is_balanced_splitter(self) -> bool:
        return bool(np.allclose(self.entries, _BS5050, rtol=0.0, atol=UNITARITY_ATOL))


_BS5050 = np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex) / math.sqrt(2.0)


def bs5050() -> ModeUnitary:
    """Balanced beam splitter (1/sqrt 2) [[1, 1], [1, -1]]."""
    return ModeUnitary(_BS5050.copy())


def identity_unitary() -> ModeUnitary:
    return ModeUnitary(np.eye(2, dtype=complex))


@dataclass(frozen=True)
class InterferenceModel:
    pair: PhotonPairConfig = field(default_factory=PhotonPairConfig)
    unitary: ModeUnitary = field(default_factory=bs5050)
    visibility_V: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 <= self.visibility_V <= 1.0):
            raise DomainError(f"visibility_V must lie in [0, 1], got {self.visibility_V!r}")


def build_lambda(model: InterferenceModel, y3, y4) -> np.ndarray:
    """Lambda(y3, y4) with rows indexed by input port and columns by output port.

    Broadcasts over array-valued positions; the result has shape
    ``broadcast(y3, y4).shape + (2, 2)``.
    """
    y3, y4 = np.broadcast_arrays(np.asarray(y3, dtype=float), np.asarray(y4, dtype=float))
    if not (np.all(np.isfinite(y3)) and np.all(np.isfinite(y4))):
        raise DomainError("detector positions must be finite")
    m1, m2 = model.pair.modes()
    u = model.unitary.entries
    lam = np.empty(y3.shape + (2, 2), dtype=complex)
    lam[..., 0, 0] = u[0, 0] * eval_chi(m1, y3)
    lam[..., 0, 1] = u[0, 1] * eval_chi(m1, y4)
    lam[..., 1, 0] = u[1, 0] * eval_chi(m2, y3)
    lam[..., 1, 1] = u[1, 1] * eval_chi(m2, y4)
    return lam


def _ryser(m: np.ndarray) -> np.ndarray:
    # Gray-code Ryser: perm = (-1)^n sum_S (-1)^|S| prod_i sum_{j in S} a_ij,
    # vectorized over any leading batch axes.
    n = m.shape[-1]
    row_sums = np.zeros(m.shape[:-1], dtype=complex)
    total = np.zeros(m.shape[:-2], dtype=complex)
    in_subset = [False] * n
    size = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        if in_subset[j]:
            row_sums -= m[..., :, j]
            size -= 1
        else:
            row_sums += m[..., :, j]
            size += 1
        in_subset[j] = not in_subset[j]
        term = np.prod(row_sums, axis=-1)
        if size & 1:
            total -= term
        else:
            total += term
    return total if n % 2 == 0 else -total


def permanent(matrix):
    """Permanent of a square matrix (or of a stack of them along leading axes).

    Direct expansion for n <= 2, Ryser's formula with Gray-code subset order
    for 3 <= n <= 20.
    """
    m = np.asarray(matrix)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise ShapeError(f"permanent needs a square matrix, got shape {m.shape}")
    n = m.shape[-1]
    if n < 1:
        raise ShapeError("permanent needs n >= 1")
    if n > MAX_PERMANENT_SIZE:
        raise SizeError(f"n = {n} exceeds the supported maximum {MAX_PERMANENT_SIZE}")
    m = m.astype(complex, copy=False)
    if n == 1:
        out = m[..., 0, 0]
    elif n == 2:
        out = m[..., 0, 0] * m[..., 1, 1] + m[..., 0, 1] * m[..., 1, 0]
    else:
        out = _ryser(m)
    if np.ndim(out) == 0:
        return complex(out)
    return out


def permanent_naive(matrix) -> complex:
    """Permutation-sum definition of the permanent; O(n! n), for cross-checks only."""
    m = np.asarray(matrix, dtype=complex)
    n = m.shape[0]
    rows = np.arange(n)
    return complex(sum(np.prod(m[rows, list(p)]) for p in permutations(range(n))))


def g2_permanent(model: InterferenceModel, y3, y4):
    """|Perm(Lambda(y3, y4))|^2. Visibility is never applied on this route."""
    val = np.abs(permanent(build_lambda(model, y3, y4))) ** 2
    return float(val) if np.ndim(val) == 0 else val


def _require_bs5050(model: InterferenceModel) -> None:
    if not model.unitary.is_balanced_splitter():
        raise UnsupportedModelError(
            "closed-form law assumes the balanced splitter; use g2_permanent for other unitaries"
        )


def joint_density(y3, y4, Q: float, d: float, w0: float, V: float = 1.0):
    """Closed-form joint probability density on (y3, y4), mm^-2."""
    y3 = np.asarray(y3, dtype=float)
    y4 = np.asarray(y4, dtype=float)
    delta = y4 - y3
    w2 = w0 * w0
    env = np.exp(-2.0 * (y3**2 + y4**2 + 2.0 * d * d) / w2) / (math.pi * w2)
    return env * (np.cosh(4.0 * d * delta / w2) - V * np.cos(Q * delta))


def delta_density(delta, Q: float, d: float, w0: float, V: float = 1.0):
    """Joint density marginalized over the common position, as a function of delta = y4 - y3."""
    delta = np.asarray(delta, dtype=float)
    w2 = w0 * w0
    pref = 1.0 / (2.0 * math.sqrt(math.pi) * w0)
    return pref * (np.cosh(4.0 * d * delta / w2) - V * np.cos(Q * delta)) * np.exp(
        -(4.0 * d * d + delta**2) / w2
    )


def coincidence_rate(Q, d: float, w0: float, V: float = 1.0):
    """Non-resolved coincidence probability; V multiplies the exponential term."""
    Q = np.asarray(Q, dtype=float)
    return 0.5 * (1.0 - V * np.exp(-(16.0 * d * d + Q**2 * w0**4) / (4.0 * w0 * w0)))


def _scalar_or_array(val):
    return float(val) if np.ndim(val) == 0 else val


def p_joint_analytic(model: InterferenceModel, y3, y4):
    _require_bs5050(model)
    y3 = np.asarray(y3, dtype=float)
    y4 = np.asarray(y4, dtype=float)
    if not (np.all(np.isfinite(y3)) and np.all(np.isfinite(y4))):
        raise DomainError("detector positions must be finite")
    p = model.pair
    return _scalar_or_array(joint_density(y3, y4, p.Q, p.d, p.w0, model.visibility_V))


def p_joint_delta(model: InterferenceModel, delta):
    _require_bs5050(model)
    delta = np.asarray(delta, dtype=float)
    if not np.all(np.isfinite(delta)):
        raise DomainError("delta must be finite")
    p = model.pair
    return _scalar_or_array(delta_density(delta, p.Q, p.d, p.w0, model.visibility_V))


def rcc(pair: PhotonPairConfig, V: float = 1.0) -> float:
    """Coincidence rate of a bucket measurement, in [0, (1 + V)/2]."""
    if not (0.0 <= V <= 1.0):
        raise DomainError(f"V must lie in [0, 1], got {V!r}")
    return float(coincidence_rate(pair.Q, pair.d, pair.w0, V))
