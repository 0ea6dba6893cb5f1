"""Spin-boson qubit in the stochastic limit.

The qubit Hamiltonian is ``H_S = -Delta/2 sigma_x + eps/2 sigma_z``; the
bath enters only through its spectral density ``J``.  All frequencies
share one unit and times are in its inverse.

Matrices are written in the ``sigma_z`` basis ``(|up>, |down>)``.  The
operator ``D = |e+><e-|`` moves weight from ``e-`` to ``e+``; the
long-time state of the dissipative evolution is ``|e+><e+|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

QUAD_OPTS = dict(epsabs=1e-12, epsrel=1e-11, limit=500)
SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
ZERO_T = "zero_T"


# Spectral densities ---------------------------------------------------------

@dataclass(frozen=True)
class OhmicClass:
    """``J(w) = alpha w^s exp(-w / omega_c)`` for ``w >= 0``."""

    alpha: float = 1.0
    s: float = 1.0
    omega_c: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.s <= 0 or self.omega_c <= 0:
            raise ValueError("alpha, s and omega_c must be positive")

    notch = None
    support = None

    def __call__(self, w):
        if isinstance(w, (float, int)):
            # scalar path for quadrature callbacks
            return self.alpha * w**self.s * math.exp(-w / self.omega_c) if w > 0 else 0.0
        w = np.asarray(w, dtype=float)
        wp = np.where(w > 0, w, 0.0)
        out = np.where(w > 0, self.alpha * wp**self.s * np.exp(-wp / self.omega_c), 0.0)
        return out if out.ndim else float(out)

    def breakpoints(self):
        return ()

    def scale(self):
        return self.omega_c


@dataclass(frozen=True)
class NotchedOhmic:
    """Ohmic-class density times ``(w - w0)^2 / ((w - w0)^2 + width^2)``.

    Smooth, positive away from ``omega0`` and exactly zero there.
    """

    alpha: float = 1.0
    s: float = 1.0
    omega_c: float = 1.0
    omega0: float = 1.0
    width: float = 0.5

    support = None

    def __post_init__(self):
        if min(self.alpha, self.s, self.omega_c, self.omega0, self.width) <= 0:
            raise ValueError("all notched-Ohmic parameters must be positive")

    @property
    def notch(self):
        return self.omega0

    def __call__(self, w):
        if isinstance(w, (float, int)):
            if w <= 0:
                return 0.0
            x2 = (w - self.omega0) ** 2
            return self.alpha * w**self.s * math.exp(-w / self.omega_c) * x2 / (x2 + self.width**2)
        w = np.asarray(w, dtype=float)
        base = OhmicClass(self.alpha, self.s, self.omega_c)(w)
        x2 = (w - self.omega0) ** 2
        out = base * x2 / (x2 + self.width**2)
        return out if np.ndim(out) else float(out)

    def breakpoints(self):
        return (self.omega0,)

    def scale(self):
        return max(self.omega_c, self.omega0)


@dataclass(frozen=True)
class Tabulated:
    """Piecewise-linear ``J`` through ``(omega, value)`` nodes, zero outside."""

    omega: tuple
    values: tuple

    notch = None

    def __post_init__(self):
        w = np.asarray(self.omega, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if w.ndim != 1 or w.shape != v.shape or w.size < 2:
            raise ValueError("need matching 1-D omega/value grids with at least two nodes")
        if np.any(np.diff(w) <= 0):
            raise ValueError("omega grid must be strictly increasing")
        if w[0] < 0 or np.any(v < 0):
            raise ValueError("tabulated density needs omega >= 0 and J >= 0")
        object.__setattr__(self, "omega", tuple(float(x) for x in w))
        object.__setattr__(self, "values", tuple(float(x) for x in v))

    @property
    def support(self):
        return (self.omega[0], self.omega[-1])

    def __call__(self, w):
        out = np.interp(w, self.omega, self.values, left=0.0, right=0.0)
        return out if np.ndim(out) else float(out)

    def breakpoints(self):
        return self.omega

    def scale(self):
        return self.omega[-1]


def spectral_J(sd, omega):
    """``J(omega)``; zero for negative frequencies."""
    return sd(omega)


def spectral_from_json(doc):
    family = str(doc.get("family", "")).lower()
    params = {k: v for k, v in doc.items() if k != "family"}
    if family in ("ohmic", "ohmic_class", "ohmicclass"):
        return OhmicClass(**_pick(params, ("alpha", "s", "omega_c")))
    if family in ("notched_ohmic", "notchedohmic", "notched"):
        return NotchedOhmic(**_pick(params, ("alpha", "s", "omega_c", "omega0", "width")))
    if family == "tabulated":
        if "points" in params:
            w, v = zip(*params["points"])
        else:
            w, v = params["omega"], params["J"]
        return Tabulated(tuple(w), tuple(v))
    raise ValueError(f"unknown spectral family {doc.get('family')!r}")


def _pick(params, allowed):
    extra = set(params) - set(allowed)
    if extra:
        raise ValueError(f"unexpected spectral parameters {sorted(extra)}")
    return {k: float(v) for k, v in params.items()}


def spectral_to_json(sd):
    if isinstance(sd, Tabulated):
        return {"family": "tabulated", "omega": list(sd.omega), "J": list(sd.values)}
    name = "notched_ohmic" if isinstance(sd, NotchedOhmic) else "ohmic"
    return {"family": name, **{k: getattr(sd, k) for k in sd.__dataclass_fields__}}


# Thermal densities -------------------------------------------------------

def _zero_limit(f, beta, scale):
    h = 1e-9 * scale
    return f(h) / (beta * h)


@dataclass(frozen=True)
class ThermalDensity:
    """``J_+ = J / (1 - e^{-beta w})`` (sign=+1) or ``J_- = J e^{-beta w} / (1 - e^{-beta w})``.

    The value at ``w = 0`` is the limit ``J(w) / (beta w)``, finite for
    ``s >= 1``.
    """

    base: object
    beta: float
    sign: int

    @property
    def notch(self):
        return self.base.notch

    @property
    def support(self):
        return self.base.support

    def breakpoints(self):
        return self.base.breakpoints()

    def scale(self):
        return self.base.scale()

    def __call__(self, w):
        if isinstance(w, (float, int)):
            if w < 0:
                return 0.0
            if w == 0:
                return _zero_limit(self.base, self.beta, self.scale())
            j = float(self.base(float(w)))
            denom = -math.expm1(-self.beta * w)
            return j / denom if self.sign > 0 else j * math.exp(-self.beta * w) / denom
        w = np.asarray(w, dtype=float)
        j = np.asarray(self.base(w), dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = -np.expm1(-self.beta * w)
            if self.sign > 0:
                out = j / denom
            else:
                out = j * np.exp(-self.beta * w) / denom
        if np.any(w == 0):
            out = np.where(w == 0, _zero_limit(self.base, self.beta, self.scale()), out)
        out = np.where(w > 0, out, np.where(w == 0, out, 0.0))
        return out if out.ndim else float(out)


def thermal_densities(sd, beta):
    return ThermalDensity(sd, beta, +1), ThermalDensity(sd, beta, -1)


# Principal-value integrals -------------------------------------------------

def _quad(f, a, b, points=()):
    """Adaptive quadrature on ``[a, b]`` split at interior breakpoints."""
    if b <= a:
        return 0.0
    cuts = [a] + sorted(p for p in points if a < p < b) + [b]
    total = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        val, _ = integrate.quad(f, lo, hi, **QUAD_OPTS)
        total += val
    return total


def _tail(f, a, sd, shift):
    """``int_a^inf f(x) / (x - shift) dx`` with ``a > shift``."""
    support = sd.support
    upper = math.inf if support is None else support[1]
    pts = sd.breakpoints()
    g = lambda x: f(x) / (x - shift)
    if upper == math.inf:
        mid = a + 40 * sd.scale()
        return _quad(g, a, mid, pts) + integrate.quad(g, mid, math.inf, **QUAD_OPTS)[0]
    return _quad(g, a, upper, pts)


def principal_value_I(sd, omega, scheme="subtract"):
    """``P.P. int_0^inf J(w') / (w' - omega) dw'``.

    ``scheme='subtract'`` removes ``J(omega)`` on the symmetric window
    ``[0, 2 omega]`` and adds the analytic log term (zero for a symmetric
    window).  ``scheme='fold'`` substitutes ``u = w' - omega`` and folds
    the window so only the odd part ``J(omega + u) - J(omega - u)``
    survives.  Both integrate the remaining tail by adaptive quadrature.
    For ``omega <= 0`` there is no pole and a plain integral is used.
    """
    omega = float(omega)
    pts = sd.breakpoints()
    if omega <= 0:
        return _tail(sd, 0.0, sd, omega) if omega < 0 else _plain_at_zero(sd)
    j0 = float(sd(omega))
    if scheme == "subtract":
        lo, hi = 0.0, 2 * omega
        g = lambda x: (sd(x) - j0) / (x - omega)
        near = _quad(g, lo, omega, pts) + _quad(g, omega, hi, pts)
        near += j0 * math.log((hi - omega) / (omega - lo))
        return near + _tail(sd, hi, sd, omega)
    if scheme == "fold":
        g = lambda u: (sd(omega + u) - sd(omega - u)) / u
        folded_pts = sorted({abs(p - omega) for p in pts if 0 < abs(p - omega) < omega})
        near = _quad(g, 0.0, omega, folded_pts)
        h = lambda u: sd(omega + u) / u
        support = sd.support
        upper = math.inf if support is None else support[1] - omega
        shifted = [p - omega for p in pts if p - omega > omega]
        if upper == math.inf:
            mid = omega + 40 * sd.scale()
            far = _quad(h, omega, mid, shifted) + integrate.quad(h, mid, math.inf, **QUAD_OPTS)[0]
        else:
            far = _quad(h, omega, upper, shifted)
        return near + far
    raise ValueError(f"unknown scheme {scheme!r}")


def _plain_at_zero(sd):
    """``int_0^inf J(w) / w dw``; converges when ``J ~ w^s`` with ``s > 0``."""
    return _tail(sd, 0.0, sd, 0.0)


# Model, eigen-system, coefficients ----------------------------------------

@dataclass(frozen=True)
class SpinBosonModel:
    """Qubit parameters plus bath.  ``beta=None`` means zero temperature.

    The coupling ``lam`` is metadata only: it is scaled out by the
    stochastic limit.
    """

    delta: float
    epsilon: float
    spectral: object
    beta: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.delta == 0:
            raise ValueError("delta must be nonzero (degenerate eigen-system)")
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive when finite")

    @property
    def zero_temperature(self):
        return self.beta is None

    @property
    def nu(self):
        return math.sqrt(1 + (self.epsilon / self.delta) ** 2)

    @property
    def frequency(self):
        """Transition frequency ``nu * Delta``."""
        return self.nu * self.delta

    def hamiltonian(self):
        return -0.5 * self.delta * SIGMA_X + 0.5 * self.epsilon * SIGMA_Z

    def with_beta(self, beta):
        return SpinBosonModel(self.delta, self.epsilon, self.spectral, beta, self.lam)


def model_from_json(doc):
    try:
        beta = doc.get("beta", ZERO_T)
        beta = None if beta in (ZERO_T, None) else float(beta)
        return SpinBosonModel(float(doc["delta"]), float(doc["epsilon"]), spectral_from_json(doc["spectral"]), beta)
    except KeyError as exc:
        raise ValueError(f"model document is missing field {exc}") from None


def model_to_json(model):
    return {
        "delta": model.delta,
        "epsilon": model.epsilon,
        "beta": ZERO_T if model.beta is None else model.beta,
        "spectral": spectral_to_json(model.spectral),
    }


@dataclass(frozen=True)
class EigenSystem:
    nu: float
    mu_plus: float
    mu_minus: float
    lam_plus: float
    lam_minus: float
    e_plus: np.ndarray = field(repr=False)
    e_minus: np.ndarray = field(repr=False)

    @property
    def D(self):
        return np.outer(self.e_plus, self.e_minus.conj())

    @property
    def diag_plus(self):
        """``<e+|sigma_z|e+> = (1 - mu_-^2) / (1 + mu_-^2)``."""
        return (1 - self.mu_minus**2) / (1 + self.mu_minus**2)

    @property
    def diag_minus(self):
        """``<e-|sigma_z|e-> = (1 - mu_+^2) / (1 + mu_+^2)``."""
        return (1 - self.mu_plus**2) / (1 + self.mu_plus**2)

    def sigma_z_element(self, bra, ket):
        vecs = {"+": self.e_plus, "-": self.e_minus}
        return complex(vecs[bra].conj() @ SIGMA_Z @ vecs[ket])

    def sigma_z_t(self, t):
        """Free evolution ``e^{itH} sigma_z e^{-itH}`` as a (..., 2, 2) array."""
        t = np.asarray(t, dtype=float)
        d = self.D
        dd = d.conj().T
        w = self.lam_plus - self.lam_minus
        ph = np.exp(1j * w * t)[..., None, None]
        static = self.diag_plus * (d @ dd) + self.diag_minus * (dd @ d)
        return static + (ph * d + ph.conj() * dd) / self.nu


def eigensystem(delta, epsilon) -> EigenSystem:
    if delta == 0:
        raise ValueError("delta must be nonzero")
    r = epsilon / delta
    nu = math.sqrt(1 + r * r)
    # the root with cancellation is taken from mu_+ mu_- = -1
    if r >= 0:
        mu_p = r + nu
        mu_m = -1.0 / mu_p
    else:
        mu_m = r - nu
        mu_p = -1.0 / mu_m
    e_p = np.array([1.0, mu_m], dtype=complex) / math.sqrt(1 + mu_m**2)
    e_m = np.array([1.0, mu_p], dtype=complex) / math.sqrt(1 + mu_p**2)
    es = EigenSystem(nu, mu_p, mu_m, 0.5 * delta * nu, -0.5 * delta * nu, e_p, e_m)
    h = -0.5 * delta * SIGMA_X + 0.5 * epsilon * SIGMA_Z
    res = max(
        np.abs(h @ e_p - es.lam_plus * e_p).max(),
        np.abs(h @ e_m - es.lam_minus * e_m).max(),
    )
    if res > 1e-12 * max(1.0, abs(delta) * nu):
        raise ArithmeticError(f"eigenvector check failed (residual {res:.3e})")
    return es


@dataclass(frozen=True)
class StochasticCoefficients:
    """Damping ``gamma``, shift ``sigma`` and phase drift ``phi``.

    ``phi`` is ``None`` at finite temperature, where no formula for it is
    available.
    """

    gamma: float
    sigma: float
    phi: float | None
    regime: str
    nu: float
    diag_weight: float = 0.0
    integrals: dict = field(default_factory=dict, compare=False)


def coefficients_zero_T(model: SpinBosonModel, scheme="subtract") -> StochasticCoefficients:
    es = eigensystem(model.delta, model.epsilon)
    nu, w = es.nu, model.frequency
    sd = model.spectral
    i_plus = principal_value_I(sd, w, scheme)
    i_minus = principal_value_I(sd, -w, scheme)
    i_zero = principal_value_I(sd, 0.0, scheme)
    weight = es.diag_plus**2 - es.diag_minus**2
    gamma = math.pi * float(sd(w)) / nu**2
    sigma = (i_minus - i_plus) / nu**2 + weight * i_zero
    phi = i_minus / nu**2 + es.diag_plus**2 * i_zero
    ints = {"I(nu Delta)": i_plus, "I(-nu Delta)": i_minus, "I(0)": i_zero}
    return StochasticCoefficients(gamma, sigma, phi, ZERO_T, nu, weight, ints)


def coefficients_finite_T(model: SpinBosonModel, scheme="subtract") -> StochasticCoefficients:
    """Finite-temperature ``gamma`` and ``sigma``.

    ``gamma`` is ``pi (J_+ + J_-)(nu Delta) / nu^2``, which equals
    ``pi J coth(beta nu Delta / 2) / nu^2``.  The ``I_+(0) + I_-(0)`` term
    of ``sigma`` carries the weight ``<e-|sz|e->^2 - <e+|sz|e+>^2``, which
    vanishes identically; those integrals (log-divergent for ``s <= 1``)
    are only evaluated when the weight is numerically nonzero.
    """
    if model.beta is None:
        raise ValueError("model is at zero temperature")
    es = eigensystem(model.delta, model.epsilon)
    nu, w = es.nu, model.frequency
    jp, jm = thermal_densities(model.spectral, model.beta)
    gamma = math.pi * (float(jp(w)) + float(jm(w))) / nu**2 if w > 0 else 0.0
    ints = {
        "I+(nu Delta)": principal_value_I(jp, w, scheme),
        "I+(-nu Delta)": principal_value_I(jp, -w, scheme),
        "I-(nu Delta)": principal_value_I(jm, w, scheme),
        "I-(-nu Delta)": principal_value_I(jm, -w, scheme),
    }
    weight = es.diag_minus**2 - es.diag_plus**2
    sigma = (ints["I+(-nu Delta)"] - ints["I+(nu Delta)"] + ints["I-(-nu Delta)"] - ints["I-(nu Delta)"]) / nu**2
    if abs(weight) > 1e-12:
        ints["I+(0)"] = principal_value_I(jp, 0.0, scheme)
        ints["I-(0)"] = principal_value_I(jm, 0.0, scheme)
        sigma += weight * (ints["I+(0)"] + ints["I-(0)"])
    return StochasticCoefficients(gamma, sigma, None, f"beta={model.beta}", nu, weight, ints)


def coefficients(model: SpinBosonModel, scheme="subtract") -> StochasticCoefficients:
    if model.zero_temperature:
        return coefficients_zero_T(model, scheme)
    return coefficients_finite_T(model, scheme)


# Closed-form dynamics --------------------------------------------------------

def P_of_t(model: SpinBosonModel, coeffs: StochasticCoefficients, t):
    """Heisenberg ``sigma_z`` in the stochastic limit, shape ``(..., 2, 2)``."""
    es = eigensystem(model.delta, model.epsilon)
    t = np.asarray(t, dtype=float)
    d = es.D
    dd = d.conj().T
    g = coeffs.gamma
    theta = (coeffs.sigma - model.frequency) * t
    osc = np.exp(-g * t) / es.nu
    ph = np.exp(1j * theta)
    out = (osc * ph)[..., None, None] * dd + (osc * ph.conj())[..., None, None] * d
    out = out + np.exp(-2 * g * t)[..., None, None] * (es.diag_minus - es.diag_plus) * (dd @ d)
    return out + es.diag_plus * np.eye(2)


def expectation(model, coeffs, psi0, t):
    """``<psi0|P(t)|psi0>`` for a unit spin state ``psi0``."""
    psi0 = np.asarray(psi0, dtype=complex)
    p = P_of_t(model, coeffs, t)
    return np.einsum("i,...ij,j->...", psi0.conj(), p, psi0)


@dataclass(frozen=True)
class CoherenceTrace:
    """Time series of the qubit's coherence.

    ``p_expect`` comes from the closed form; ``rho``, ``sz_expect`` and
    ``offdiag_abs`` (``|<e+|rho|e->|``) from the master equation.
    """

    times: np.ndarray
    p_expect: np.ndarray | None = None
    P: np.ndarray | None = field(default=None, repr=False)
    rho: np.ndarray | None = field(default=None, repr=False)
    sz_expect: np.ndarray | None = None
    offdiag_abs: np.ndarray | None = None
    trace_drift: float = 0.0
    hermiticity_error: float = 0.0
    min_eigenvalue: float = 0.0


def default_times(model, n=2000, span=50.0):
    return np.linspace(0.0, span / abs(model.frequency), n)


def closed_form_trace(model, coeffs, psi0, times=None) -> CoherenceTrace:
    times = default_times(model) if times is None else np.asarray(times, dtype=float)
    p = P_of_t(model, coeffs, times)
    psi0 = np.asarray(psi0, dtype=complex)
    return CoherenceTrace(times, np.einsum("i,tij,j->t", psi0.conj(), p, psi0), p)


def _superop(h, jump, rate):
    """Row-major vectorised Lindblad generator: vec(A rho B) = (A kron B^T) vec(rho)."""
    eye = np.eye(2)
    jd = jump.conj().T
    jdj = jd @ jump
    out = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    out += rate * (np.kron(jump, jump.conj()) - 0.5 * np.kron(jdj, eye) - 0.5 * np.kron(eye, jdj.T))
    return out


def _rk4(L, v, h):
    k1 = L @ v
    k2 = L @ (v + 0.5 * h * k1)
    k3 = L @ (v + 0.5 * h * k2)
    k4 = L @ (v + h * k3)
    return v + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)


def master_step_size(model, coeffs, factor=500.0):
    """Fixed RK4 step: ``min(1/gamma_hat, 1/|sigma - nu Delta|, 1/|nu Delta|, 1/|sigma|) / factor``."""
    w = abs(model.frequency)
    g_hat = max(coeffs.gamma, w * 1e-6)
    rates = [g_hat, abs(coeffs.sigma - model.frequency), w, abs(coeffs.sigma)]
    return min(1.0 / r for r in rates if r > 0) / factor


def master_equation_evolve(model, coeffs, rho0, times=None, step=None) -> CoherenceTrace:
    """Integrate the limiting dissipative equation for the qubit density matrix.

    Interaction picture, effective Hamiltonian ``sigma D^+ D`` and jump
    operator ``D`` at rate ``2 gamma`` (coherences decay at ``gamma``).
    Fixed-step classical RK4 with several substeps per grid interval; the
    reported ``sz_expect`` is ``Tr[rho(t) sigma_z(t)]``.
    """
    es = eigensystem(model.delta, model.epsilon)
    times = default_times(model) if times is None else np.asarray(times, dtype=float)
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (2, 2):
        raise ValueError("rho0 must be 2x2")
    if abs(np.trace(rho0) - 1) > 1e-12 or np.abs(rho0 - rho0.conj().T).max() > 1e-12:
        raise ValueError("rho0 must be Hermitian with unit trace")
    if np.linalg.eigvalsh(rho0).min() < -1e-12:
        raise ValueError("rho0 must be positive semidefinite")
    d = es.D
    L = _superop(coeffs.sigma * (d.conj().T @ d), d, 2 * coeffs.gamma)
    h_max = master_step_size(model, coeffs) if step is None else step

    eye4 = np.eye(4, dtype=complex)
    cache = {}

    def propagator(dt):
        key = round(dt, 15)
        if key not in cache:
            n = max(1, math.ceil(dt / h_max))
            h = dt / n
            step1 = np.column_stack([_rk4(L, eye4[:, k], h) for k in range(4)])
            # RK4 keeps the trace exactly, so drift alone cannot flag a bad step;
            # an amplifying one-step map can
            radius = float(np.abs(np.linalg.eigvals(step1)).max())
            if radius > 1 + 1e-12:
                raise ArithmeticError(f"RK4 step {h:.3g} is unstable (growth {radius:.6f}); use a finer step")
            cache[key] = np.linalg.matrix_power(step1, n)
        return cache[key]

    vs = np.empty((times.size, 4), dtype=complex)
    v = rho0.reshape(-1).copy()
    vs[0] = v
    for k in range(1, times.size):
        v = propagator(times[k] - times[k - 1]) @ v
        vs[k] = v
    rho = vs.reshape(-1, 2, 2)
    traces = np.einsum("tii->t", rho)
    drift = float(np.abs(traces - 1).max())
    if drift > 1e-8:
        raise ArithmeticError(f"trace drift {drift:.2e} exceeds 1e-8; use a finer step")
    herm = float(np.abs(rho - np.conj(np.swapaxes(rho, 1, 2))).max())
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + np.conj(np.swapaxes(rho, 1, 2)))).min())
    sz = np.einsum("tij,tji->t", rho, es.sigma_z_t(times))
    offdiag = np.abs(np.einsum("i,tij,j->t", es.e_plus.conj(), rho, es.e_minus))
    return CoherenceTrace(times, None, None, rho, sz, offdiag, drift, herm, min_eig)


def oscillation_envelope(model, trace: CoherenceTrace):
    """Upper and lower envelopes of ``Tr[rho sigma_z(t)]`` from the master-equation state.

    ``Tr[rho sigma_z(t)] = base(t) + (2/nu)|rho_+-| cos(phase)`` with
    ``base = <e+|sz|e+> rho_++ + <e-|sz|e-> rho_--``.
    """
    es = eigensystem(model.delta, model.epsilon)
    rho = trace.rho
    pp = np.real(np.einsum("i,tij,j->t", es.e_plus.conj(), rho, es.e_plus))
    mm = np.real(np.einsum("i,tij,j->t", es.e_minus.conj(), rho, es.e_minus))
    base = es.diag_plus * pp + es.diag_minus * mm
    amp = 2 * trace.offdiag_abs / es.nu
    return base + amp, base - amp


def spin_state(name):
    """Named qubit states in the sigma_z basis."""
    table = {
        "up": [1, 0],
        "down": [0, 1],
        "plus": [1 / math.sqrt(2), 1 / math.sqrt(2)],
        "minus": [1 / math.sqrt(2), -1 / math.sqrt(2)],
    }
    return np.array(table[name], dtype=complex)


# Decoherence-free tuning ---------------------------------------------------------

def decoherence_free_check(model: SpinBosonModel, grid=4001):
    """``(J(nu Delta), free)``, free when ``|J| < 1e-12 max(1, sup_{[0, 4 nu Delta]} J)``.

    Depends on ``J`` only, so the answer is the same at every temperature.
    """
    w = model.frequency
    residual = float(model.spectral(w))
    sup = float(np.max(model.spectral(np.linspace(0.0, 4 * abs(w), grid))))
    return residual, abs(residual) < 1e-12 * max(sup, 1.0)


@dataclass(frozen=True)
class TuningResult:
    delta: float
    epsilon: float
    nu: float
    gamma: float
    decoherence_free: bool
    residual: float
    message: str = ""

    def to_dict(self):
        return {
            "delta": self.delta,
            "epsilon": self.epsilon,
            "nu": self.nu,
            "gamma": self.gamma,
            "decoherence_free": self.decoherence_free,
        }


def _gamma0(sd, delta, eps):
    nu = math.sqrt(1 + (eps / delta) ** 2)
    return math.pi * float(sd(nu * delta)) / nu**2


def _result(sd, delta, eps, message=""):
    model = SpinBosonModel(delta, eps, sd)
    residual, free = decoherence_free_check(model)
    return TuningResult(delta, eps, model.nu, _gamma0(sd, delta, eps), free, residual, message)


def _solve_notch(sd, delta, lo, hi, target):
    """Root of ``nu(eps) Delta - target`` on the non-negative part of the box."""
    f = lambda e: math.sqrt(1 + (e / delta) ** 2) * delta - target
    branches = []
    if hi >= 0:
        branches.append((max(lo, 0.0), hi))
    if lo < 0:
        branches.append((min(hi, 0.0), lo))
    for a, b in branches:
        fa, fb = f(a), f(b)
        if fa == 0:
            return a
        if fb == 0:
            return b
        if fa * fb < 0:
            return optimize.brentq(f, min(a, b), max(a, b), xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return None


def _scan_epsilon(sd, delta, lo, hi, n=801):
    eps = np.linspace(lo, hi, n)
    nu = np.sqrt(1 + (eps / delta) ** 2)
    gam = np.pi * np.asarray(sd(nu * delta)) / nu**2
    zero = np.flatnonzero(gam == 0)
    if zero.size:
        # centre of the first run of exact zeros
        runs = np.split(zero, np.flatnonzero(np.diff(zero) > 1) + 1)
        run = runs[0]
        return float(eps[run[len(run) // 2]]), 0.0
    k = int(np.argmin(gam))
    a, b = eps[max(k - 1, 0)], eps[min(k + 1, n - 1)]
    if b > a:
        res = optimize.minimize_scalar(lambda e: _gamma0(sd, delta, e), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-12})
        if res.fun < gam[k]:
            return float(res.x), float(res.fun)
    return float(eps[k]), float(gam[k])


def tune_parameters(sd, delta=1.0, epsilon_box=(-10.0, 10.0)) -> TuningResult:
    """Find ``(Delta, eps)`` with ``J(nu Delta) = 0``.

    ``delta`` is either a fixed value or a ``(lo, hi)`` range.  With a
    known notch the condition ``nu Delta = omega0`` is solved by root
    finding in ``eps``; otherwise ``gamma`` is scanned on a grid and
    refined by bounded minimisation.  When no zero is reachable the best
    parameters are returned with ``decoherence_free=False``.
    """
    lo, hi = map(float, epsilon_box)
    if hi < lo:
        raise ValueError("epsilon box is empty")
    deltas = np.linspace(*delta, 33) if isinstance(delta, (tuple, list)) else np.array([float(delta)])
    deltas = deltas[deltas != 0]
    if deltas.size == 0:
        raise ValueError("delta range contains only zero")
    target = sd.notch
    if target is not None:
        for dl in deltas:
            eps = _solve_notch(sd, float(dl), lo, hi, target)
            if eps is not None:
                res = _result(sd, float(dl), eps, "notch solved")
                if res.decoherence_free:
                    return res
    best = None
    for dl in deltas:
        eps, gam = _scan_epsilon(sd, float(dl), lo, hi)
        if best is None or gam < best[2]:
            best = (float(dl), eps, gam)
        if gam == 0.0:
            break
    res = _result(sd, best[0], best[1], "minimised gamma")
    if not res.decoherence_free:
        return TuningResult(res.delta, res.epsilon, res.nu, res.gamma, False, res.residual,
                            "no zero of J reachable in the box; best gamma reported")
    return res


def coherence_factor(coeffs, times):
    """Single-qubit off-diagonal decay ``exp(-gamma t)``."""
    return np.exp(-coeffs.gamma * np.asarray(times, dtype=float))


def register_coherence_envelope(per_qubit, a, b):
    """Envelope of ``|rho_ab(t)|`` for an l-qubit register.

    Assumes every qubit couples to its own independent, identical kind of
    reservoir, so the envelope is the product of the single-qubit factors
    over the bit positions where ``a`` and ``b`` differ.  This is a model
    assumption, not a derived multi-qubit result.
    """
    per_qubit = [np.asarray(f, dtype=float) for f in per_qubit]
    a = tuple(int(x) for x in a)
    b = tuple(int(x) for x in b)
    if len(a) != len(per_qubit) or len(b) != len(per_qubit):
        raise ValueError(f"bit strings of length {len(a)}/{len(b)} do not match {len(per_qubit)} qubits")
    env = np.ones_like(per_qubit[0]) if per_qubit else np.ones(1)
    for k, (x, y) in enumerate(zip(a, b)):
        if x != y:
            env = env * per_qubit[k]
    return env
