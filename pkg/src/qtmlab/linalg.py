"""Dense complex linear algebra and simple-form unitary decomposition.

A simple-form factor is either a real 2x2 rotation acting on a coordinate
pair or a single-coordinate phase.  Any unitary is reduced to a product of
such factors by Givens elimination of the sub-diagonal entries, and the
factor angles can then be snapped to integer multiples of a fixed base
angle (for example ``arccos(3/5)``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ZERO_PIVOT = 1e-14
ANGLE_EPS = 1e-15
DEFAULT_N_MAX = 10_000_000
UNIVERSAL_THETA = math.acos(3 / 5)


class NotUnitaryError(ValueError):
    """Raised when a matrix fails a unitarity check."""

    def __init__(self, residual, tol):
        super().__init__(f"matrix is not unitary: residual {residual:.3e} > tol {tol:.1e}")
        self.residual = residual
        self.tol = tol


class SearchBudgetExceeded(RuntimeError):
    """Raised when ``approx_angle`` runs out of multipliers."""


def as_matrix(m):
    a = np.asarray(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def operator_norm(m) -> float:
    """Largest singular value of ``m``."""
    a = as_matrix(m)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 2))


def check_unitary(m, tol=1e-12):
    """Return ``(ok, residual)`` with residual ``||M*M - I||_2``."""
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"unitarity check needs a square matrix, got {a.shape}")
    residual = operator_norm(a.conj().T @ a - np.eye(a.shape[0]))
    return residual <= tol, residual


def rotation_matrix(theta, d=2, i=0, j=1):
    m = np.eye(d, dtype=complex)
    c, s = math.cos(theta), math.sin(theta)
    m[i, i], m[i, j], m[j, i], m[j, j] = c, -s, s, c
    return m


@dataclass(frozen=True)
class SimpleFormFactor:
    """A rotation on coordinates ``(i, j)`` or a phase on coordinate ``i``.

    ``multiplier`` is set when the angle is an integer multiple of a base
    angle (rational-angle mode).
    """

    dim: int
    kind: str
    indices: tuple
    angle: float
    multiplier: int | None = None

    def __post_init__(self):
        if self.kind == "rotation":
            i, j = self.indices
            if i == j or not (0 <= i < self.dim and 0 <= j < self.dim):
                raise ValueError(f"bad rotation indices {self.indices} for d={self.dim}")
        elif self.kind == "phase":
            (i,) = self.indices
            if not 0 <= i < self.dim:
                raise ValueError(f"bad phase index {i} for d={self.dim}")
        else:
            raise ValueError(f"unknown factor kind {self.kind!r}")

    @classmethod
    def rotation(cls, dim, i, j, angle, multiplier=None):
        return cls(dim, "rotation", (int(i), int(j)), float(angle), multiplier)

    @classmethod
    def phase(cls, dim, i, angle, multiplier=None):
        return cls(dim, "phase", (int(i),), float(angle), multiplier)

    def inverse(self):
        return SimpleFormFactor(self.dim, self.kind, self.indices, -self.angle)

    def matrix(self):
        if self.kind == "rotation":
            return rotation_matrix(self.angle, self.dim, *self.indices)
        m = np.eye(self.dim, dtype=complex)
        m[self.indices[0], self.indices[0]] = np.exp(1j * self.angle)
        return m

    def apply_left(self, m):
        """Return ``F @ m`` by touching only the affected rows."""
        out = np.array(m, dtype=complex, copy=True)
        if self.kind == "rotation":
            i, j = self.indices
            c, s = math.cos(self.angle), math.sin(self.angle)
            ri, rj = out[i].copy(), out[j].copy()
            out[i] = c * ri - s * rj
            out[j] = s * ri + c * rj
        else:
            out[self.indices[0]] *= np.exp(1j * self.angle)
        return out

    def apply_right(self, m):
        """Return ``m @ F`` by touching only the affected columns."""
        out = np.array(m, dtype=complex, copy=True)
        if self.kind == "rotation":
            i, j = self.indices
            c, s = math.cos(self.angle), math.sin(self.angle)
            ci, cj = out[:, i].copy(), out[:, j].copy()
            out[:, i] = c * ci + s * cj
            out[:, j] = -s * ci + c * cj
        else:
            out[:, self.indices[0]] *= np.exp(1j * self.angle)
        return out

    def to_dict(self):
        out = {"kind": self.kind, "indices": list(self.indices), "angle": self.angle}
        if self.multiplier is not None:
            out["n"] = self.multiplier
        return out


def product(factors, dim):
    """Matrix product ``F_1 F_2 ... F_n`` in list order."""
    m = np.eye(dim, dtype=complex)
    for f in factors:
        m = f.apply_right(m)
    return m


@dataclass(frozen=True)
class DecompositionResult:
    factors: tuple
    residual: float
    dim: int
    target: np.ndarray = field(repr=False, compare=False)

    @property
    def factor_count(self):
        return len(self.factors)

    def matrix(self):
        return product(self.factors, self.dim)

    def recompute_residual(self):
        return operator_norm(self.target - self.matrix())


def _wrap(angle):
    return math.remainder(angle, 2 * math.pi)


def decompose_simple_form(u, tol=1e-10) -> DecompositionResult:
    """Exact simple-form decomposition of a unitary matrix.

    Sub-diagonal entries are eliminated column by column with real
    rotations on the pair ``(j, i)``; a phase on row ``i`` first aligns the
    entry with the pivot so the rotation can stay real.  The remaining
    diagonal is emitted as trailing phases.  At most ``d**2`` factors are
    produced, inside the ``2 d**2 - d`` budget.
    """
    u = as_matrix(u)
    ok, res = check_unitary(u, tol)
    if not ok:
        raise NotUnitaryError(res, tol)
    d = u.shape[0]
    w = u.copy()
    ops = []  # left-applied eliminations, G_k ... G_1 U = diagonal
    for j in range(d - 1):
        for i in range(j + 1, d):
            y = w[i, j]
            if abs(y) < ZERO_PIVOT:
                continue
            x = w[j, j]
            ref = np.angle(x) if abs(x) >= ZERO_PIVOT else 0.0
            phi = _wrap(ref - np.angle(y))
            if abs(phi) > ANGLE_EPS:
                op = SimpleFormFactor.phase(d, i, phi)
                w = op.apply_left(w)
                ops.append(op)
            theta = math.atan2(-abs(y), abs(x))
            op = SimpleFormFactor.rotation(d, j, i, theta)
            w = op.apply_left(w)
            w[i, j] = 0.0
            ops.append(op)
    factors = [op.inverse() for op in ops]
    for k in range(d):
        theta = float(np.angle(w[k, k]))
        if abs(theta) > ANGLE_EPS:
            factors.append(SimpleFormFactor.phase(d, k, theta))
    factors = tuple(factors)
    residual = operator_norm(u - product(factors, d))
    return DecompositionResult(factors, residual, d, u)


def circular_distance(a, b):
    """Distance between two angles on the unit circle."""
    return np.abs(np.remainder(np.asarray(a) - b + np.pi, 2 * np.pi) - np.pi)


def approx_angle(target, theta0, eps, n_max=DEFAULT_N_MAX) -> int:
    """Smallest ``n >= 0`` with ``n * theta0`` within ``eps`` of ``target`` mod 2 pi."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    start, chunk = 0, 4096
    while start <= n_max:
        stop = min(start + chunk, n_max + 1)
        n = np.arange(start, stop, dtype=np.int64)
        dist = circular_distance(n * theta0, target)
        hit = np.flatnonzero(dist < eps)
        if hit.size:
            return int(n[hit[0]])
        start = stop
        chunk = min(2 * chunk, 1 << 20)
    raise SearchBudgetExceeded(
        f"no multiple of theta0={theta0} within {eps:g} of {target} for n <= {n_max}"
    )


def approx_unitary(u, eps, theta0=UNIVERSAL_THETA, n_max=DEFAULT_N_MAX) -> DecompositionResult:
    """Decomposition whose every angle is an integer multiple of ``theta0``.

    Each factor gets an angle budget of ``(eps - exact_residual) / count``;
    since a rotation or phase moved by ``delta`` changes by at most
    ``delta`` in operator norm, the product stays within ``eps``.
    """
    exact = decompose_simple_form(u)
    d = exact.dim
    count = exact.factor_count
    if count == 0:
        return exact
    budget = (eps - exact.residual) / count
    if budget <= 0:
        raise ValueError(f"eps={eps} is below the exact residual {exact.residual}")
    snapped = []
    for f in exact.factors:
        n = approx_angle(f.angle, theta0, budget, n_max=n_max)
        snapped.append(SimpleFormFactor(d, f.kind, f.indices, n * theta0, n))
    snapped = tuple(snapped)
    residual = operator_norm(exact.target - product(snapped, d))
    return DecompositionResult(snapped, residual, d, exact.target)


def random_unitary(d, rng=None):
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    rng = np.random.default_rng(rng)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    return q * (diag / np.abs(diag))


def matrix_to_json(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in as_matrix(m)]


def matrix_from_json(rows):
    """Inverse of ``matrix_to_json``; plain real numbers are accepted too."""
    out = []
    for row in rows:
        out_row = []
        for z in row:
            if isinstance(z, (list, tuple)):
                if len(z) != 2:
                    raise ValueError(f"complex entry must be [re, im], got {z!r}")
                out_row.append(complex(z[0], z[1]))
            else:
                out_row.append(complex(z))
        out.append(out_row)
    return as_matrix(out)
