"""Integrals with phase ``alpha*exp(tau)``, time averages and scalar harnesses.

After the substitution ``x = exp(tau)`` an integrand
``cos(alpha*exp(tau) + psi(tau)) f(tau)`` becomes a Fourier-type integrand
``cos(alpha*x) A(x) - sin(alpha*x) B(x)`` with slowly varying amplitudes
``A = cos(psi(log x)) f(log x)/x`` and ``B = sin(psi(log x)) f(log x)/x``.
Those are handed to QUADPACK's Fourier-weight routines (QAWO on bounded
ranges, QAWF with epsilon-algorithm extrapolation over half-period cycles
for tails), which cope with ``10**13`` oscillations without resolving them
point by point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as sint
from scipy.special import sici

from .errors import InvalidArgument, QuadratureFailure

__all__ = [
    "PhaseFunction",
    "TrigCorrections",
    "OscillatoryForcing",
    "ScalarHarnessSpec",
    "ProbeResult",
    "osc_integral",
    "osc_product_integral",
    "time_average",
    "running_average",
    "average_convergence_exponent",
    "semi_integrability_probe",
    "osc_bound_sweep",
    "product_bound_check",
    "series_bound_check",
    "prop_R_harness",
    "bernoulli_harness",
    "bernoulli_threshold",
    "ADVERSARY_SCHEDULES",
]

# bounded ranges with fewer cycles than this go straight to QAWO
_DIRECT_CYCLES = 2000.0


@dataclass(frozen=True)
class PhaseFunction:
    """Slowly varying phase ``psi`` with ``|psi'| <= lipschitz``."""

    psi: Callable[[float], float]
    dpsi: Callable[[float], float]
    lipschitz: float = 0.0

    def __post_init__(self):
        if not self.lipschitz >= 0:
            raise InvalidArgument("lipschitz bound must be nonnegative")

    @classmethod
    def zero(cls) -> "PhaseFunction":
        return cls(lambda t: 0.0 * t, lambda t: 0.0 * t, 0.0)

    @classmethod
    def linear(cls, slope: float, intercept: float = 0.0) -> "PhaseFunction":
        slope, intercept = float(slope), float(intercept)
        return cls(lambda t: slope * t + intercept, lambda t: slope + 0.0 * t, abs(slope))

    @property
    def is_zero(self) -> bool:
        return self.lipschitz == 0.0 and np.all(self.psi(np.array([0.0, 1.0])) == 0.0)

    def check(self, t: float, s: float, samples: int = 257) -> bool:
        """Spot-check ``|psi'| <= lipschitz`` on ``[t, s]``."""
        grid = np.linspace(t, s, samples)
        d = np.abs(np.broadcast_to(np.asarray(self.dpsi(grid), dtype=float), grid.shape))
        return bool(np.all(d <= self.lipschitz * (1 + 1e-12) + 1e-15))


class TrigCorrections:
    """Deviations of ``sin**2``-type factors from their time averages."""

    a_bound = 0.5
    b_bound = 0.625
    c_bound = 0.75

    @staticmethod
    def a(theta):
        return np.sin(theta) ** 2 - 0.5

    @staticmethod
    def b(theta):
        return np.sin(theta) ** 4 - 0.375

    @staticmethod
    def c(theta_h, theta_k):
        return np.sin(theta_h) ** 2 * np.sin(theta_k) ** 2 - 0.25

    @staticmethod
    def a_forcing(lam: float, phase: float = 0.0) -> "OscillatoryForcing":
        """``a(theta(s))`` for ``theta(s) = lam*exp(s) + phase`` as a sum of cosines."""
        return OscillatoryForcing(((-0.5, 2 * lam, 2 * phase),))

    @staticmethod
    def b_forcing(lam: float, phase: float = 0.0) -> "OscillatoryForcing":
        return OscillatoryForcing(((-0.5, 2 * lam, 2 * phase), (0.125, 4 * lam, 4 * phase)))

    @staticmethod
    def c_forcing(lam_h: float, lam_k: float, phase_h: float = 0.0,
                  phase_k: float = 0.0) -> "OscillatoryForcing":
        """For equal frequencies the difference term is the constant ``cos(2(phase_h - phase_k))/8``."""
        terms = [(-0.25, 2 * lam_h, 2 * phase_h), (-0.25, 2 * lam_k, 2 * phase_k),
                 (0.125, 2 * (lam_h + lam_k), 2 * (phase_h + phase_k))]
        const = 0.0
        if lam_h == lam_k:
            const = 0.125 * math.cos(2 * (phase_h - phase_k))
        elif lam_h > lam_k:
            terms.append((0.125, 2 * (lam_h - lam_k), 2 * (phase_h - phase_k)))
        else:
            terms.append((0.125, 2 * (lam_k - lam_h), 2 * (phase_k - phase_h)))
        return OscillatoryForcing(tuple(terms), constant=const)


@dataclass(frozen=True)
class OscillatoryForcing:
    """``f(t) = constant + smooth(t) + sum_j amp_j cos(alpha_j exp(t) + phase_j)``.

    Integrals of the cosine terms are exact through the sine/cosine integrals
    ``Si``/``Ci``; ``smooth`` (if given) must be a plain smooth function.
    """

    terms: tuple = ()
    constant: float = 0.0
    smooth: Callable | None = None

    def __post_init__(self):
        for amp, alpha, phase in self.terms:
            if not alpha > 0:
                raise InvalidArgument("oscillatory frequencies must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, float(self.constant))
        for amp, alpha, phase in self.terms:
            out = out + amp * np.cos(alpha * np.exp(t) + phase)
        if self.smooth is not None:
            out = out + self.smooth(t)
        return out if out.ndim else float(out)

    def _osc_primitive(self, t):
        # int cos(alpha e^tau + c) dtau = cos(c) Ci(alpha e^tau) - sin(c) Si(alpha e^tau)
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for amp, alpha, phase in self.terms:
            si, ci = sici(alpha * np.exp(t))
            out = out + amp * (math.cos(phase) * ci - math.sin(phase) * si)
        return out

    def integral(self, t: float, s: float) -> float:
        """``int_t^s f``."""
        val = float(self._osc_primitive(s) - self._osc_primitive(t)) + self.constant * (s - t)
        if self.smooth is not None:
            val += _gauss(self.smooth, t, s)
        return val

    def primitive(self, t) -> np.ndarray:
        """``int_0^t f`` on an ascending array of times."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = self._osc_primitive(t) - self._osc_primitive(0.0) + self.constant * t
        if self.smooth is not None:
            pieces = [_gauss(self.smooth, a, b) for a, b in zip(np.r_[0.0, t[:-1]], t)]
            out = out + np.cumsum(pieces)
        return out

    @property
    def oscillation_constant(self) -> float:
        """``sum |amp_j| * 3/alpha_j``, the envelope constant of the cosine part."""
        return sum(abs(a) * 3.0 / al for a, al, _ in self.terms)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _gauss(f, a, b):
    if a == b:
        return 0.0
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return float(half * np.sum(_GL_W * np.asarray(f(mid + half * _GL_X), dtype=float)))


# ---------------------------------------------------------------------------
# Quadrature


def _quad(weight, amp, a, b, alpha, tol):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sint.IntegrationWarning)
        if math.isinf(b):
            res = sint.quad(amp, a, b, weight=weight, wvar=alpha, epsabs=tol,
                            limlst=400, limit=200, full_output=1)
        else:
            res = sint.quad(amp, a, b, weight=weight, wvar=alpha, epsabs=tol, epsrel=0.0,
                            limit=5000, full_output=1)
    value, err = res[0], res[1]
    if not (math.isfinite(value) and err <= 10 * tol):
        raise QuadratureFailure(
            f"oscillatory quadrature missed tolerance {tol:g} (error estimate {err:g})",
            estimate=value, error=err,
        )
    return value


def _fourier(alpha, amp_c, amp_s, xa, xb, tol):
    """``int_xa^xb cos(alpha x) amp_c(x) - sin(alpha x) amp_s(x) dx``."""
    if xb == xa:
        return 0.0
    parts = [("cos", amp_c, 1.0), ("sin", amp_s, -1.0)]
    total = 0.0
    for weight, amp, sign in parts:
        if amp is None:
            continue
        if alpha * (xb - xa) <= 2 * math.pi * _DIRECT_CYCLES:
            val = _quad(weight, amp, xa, xb, alpha, tol / 2)
        else:
            val = _quad(weight, amp, xa, math.inf, alpha, tol / 4) - _quad(
                weight, amp, xb, math.inf, alpha, tol / 4)
        total += sign * val
    return total


def osc_product_integral(alpha: float, psi: PhaseFunction, f: Callable | None,
                         t: float, s: float, tol: float = 1e-10) -> float:
    """``int_t^s cos(alpha exp(tau) + psi(tau)) f(tau) dtau`` (``f=None`` means 1)."""
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    if not (0 <= t <= s):
        raise InvalidArgument("need 0 <= t <= s")
    if t == s:
        return 0.0
    xa, xb = math.exp(t), math.exp(s)
    zero_phase = psi.is_zero

    def weight_fn(x):
        w = 1.0 / x
        if f is not None:
            w = w * f(np.log(x))
        return w

    if zero_phase:
        amp_c, amp_s = weight_fn, None
    else:
        amp_c = lambda x: np.cos(psi.psi(np.log(x))) * weight_fn(x)  # noqa: E731
        amp_s = lambda x: np.sin(psi.psi(np.log(x))) * weight_fn(x)  # noqa: E731
    return _fourier(alpha, amp_c, amp_s, xa, xb, tol)


def osc_integral(alpha: float, psi: PhaseFunction | None, t: float, s: float,
                 tol: float = 1e-10) -> tuple[float, float]:
    """Return ``(value, bound)`` for ``int_t^s cos(alpha exp(tau) + psi(tau)) dtau``.

    ``bound = (3 + L3)/(alpha exp(t))`` with ``L3 = psi.lipschitz``.
    """
    psi = psi or PhaseFunction.zero()
    if not alpha > 0:
        raise InvalidArgument("alpha must be positive")
    if not (0 <= t <= s):
        raise InvalidArgument("need 0 <= t <= s")
    if not psi.check(t, s):
        raise InvalidArgument("phase derivative exceeds its stated Lipschitz bound")
    scale = (3.0 + psi.lipschitz) / alpha
    bound = scale * math.exp(-t)
    # beyond tau_cut the whole remaining tail is below tol/4 by the same estimate
    tau_cut = math.log(scale / (tol / 4))
    s_eff = min(s, max(t, tau_cut))
    return osc_product_integral(alpha, psi, None, t, s_eff, tol), bound


# ---------------------------------------------------------------------------
# Time averages

_AVERAGE_LIMITS = {"sin2": 0.5, "sin4": 0.375, "sin2sin2": 0.25}


def _average_forcing(kind: str, lam: float, mu: float | None) -> OscillatoryForcing:
    if not lam > 0:
        raise InvalidArgument("frequencies must be positive")
    if kind == "sin2":
        f = TrigCorrections.a_forcing(lam)
        return OscillatoryForcing(f.terms, constant=0.5)
    if kind == "sin4":
        f = TrigCorrections.b_forcing(lam)
        return OscillatoryForcing(f.terms, constant=0.375)
    if kind == "sin2sin2":
        if mu is None or not mu > 0:
            raise InvalidArgument("sin2sin2 needs a positive second frequency mu")
        f = TrigCorrections.c_forcing(lam, mu)
        return OscillatoryForcing(f.terms, constant=0.25 + f.constant)
    raise InvalidArgument(f"unknown average kind {kind!r}")


def time_average(kind: str, T: float, lam: float = 1.0, mu: float | None = None,
                 tol: float = 1e-11) -> float:
    """``(1/T) int_0^T`` of ``sin^2(lam e^s)``, ``sin^4(lam e^s)`` or
    ``sin^2(lam e^s) sin^2(mu e^s)``.

    Each product is expanded into a constant plus cosines with phase
    ``alpha e^s``; the cosine integrals go through :func:`osc_integral`.
    """
    if not T >= 1:
        raise InvalidArgument("T must be at least 1")
    f = _average_forcing(kind, lam, mu)
    total = f.constant * T
    for amp, alpha, phase in f.terms:
        value, _ = osc_integral(alpha, PhaseFunction.linear(0.0, phase), 0.0, T, tol)
        total += amp * value
    return total / T


def running_average(kind: str, T_values: Sequence[float], lam: float = 1.0,
                    mu: float | None = None) -> np.ndarray:
    return np.array([time_average(kind, T, lam, mu) for T in T_values])


def average_limit(kind: str, lam: float = 1.0, mu: float | None = None) -> float:
    if kind == "sin2sin2" and lam == mu:
        return 0.375
    return _AVERAGE_LIMITS[kind]


def average_convergence_exponent(kind: str, lam: float = 1.0, mu: float | None = None,
                                 T_values: Sequence[float] = (10, 20, 50, 100, 200, 500, 1000)) -> float:
    """Fitted ``p`` in ``|average(T) - limit| ~ C T**-p``."""
    T = np.asarray(T_values, dtype=float)
    dev = np.abs(running_average(kind, T, lam, mu) - average_limit(kind, lam, mu))
    return float(-np.polyfit(np.log(T), np.log(dev), 1)[0])


# ---------------------------------------------------------------------------
# Semi-integrability


@dataclass
class ProbeResult:
    """Envelope ``sup_{s in [t, s_max]} |int_t^s f|`` on ``t_grid`` plus a decay verdict.

    ``classification`` is one of ``"exponential"``, ``"semi-integrable"``,
    ``"not semi-integrable"`` or ``"inconclusive"``.  ``constant`` is
    ``max envelope(t) * exp(t)`` (finite for exponential decay).
    """

    t: np.ndarray
    envelope: np.ndarray
    classification: str
    constant: float
    window_ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def pairs(self):
        return list(zip(self.t.tolist(), self.envelope.tolist()))


def _cumulative(f, lo, s_max, n_dense):
    grid = np.linspace(lo, s_max, n_dense)
    if hasattr(f, "primitive"):
        F = f.primitive(grid) - f.primitive(np.array([lo]))[0]
    else:
        F = sint.cumulative_simpson(np.asarray(f(grid), dtype=float), x=grid, initial=0.0)
    return grid, F


def semi_integrability_probe(f: Callable, t_grid: Sequence[float], s_max: float,
                             n_dense: int = 200_001, windows: int = 6) -> ProbeResult:
    """Measure how the partial integrals of ``f`` settle.

    ``f`` is sampled on a uniform grid of ``n_dense`` points (or integrated
    exactly when it has a ``primitive`` method).  The tail is split into
    ``windows`` pieces with geometric edges in ``1+tau``; the oscillation of the
    primitive over consecutive pieces shrinks for semi-integrable ``f`` and
    stays flat for a divergent integral such as ``1/(1+tau)``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    lo = float(t_grid.min())
    if not s_max > lo:
        raise InvalidArgument("s_max must exceed the smallest grid time")
    grid, F = _cumulative(f, lo, s_max, n_dense)
    suf_max = np.maximum.accumulate(F[::-1])[::-1]
    suf_min = np.minimum.accumulate(F[::-1])[::-1]
    idx = np.clip(np.searchsorted(grid, t_grid), 0, grid.size - 1)
    Ft = F[idx]
    env = np.maximum(suf_max[idx] - Ft, Ft - suf_min[idx])
    env = np.maximum(env, 0.0)

    edges = np.geomspace(1.0 + lo, 1.0 + s_max, windows + 1) - 1.0
    var = []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (grid >= a) & (grid <= b)
        var.append(np.ptp(F[sel]) if np.count_nonzero(sel) > 1 else 0.0)
    var = np.array(var)
    ratios = var[1:] / np.where(var[:-1] > 0, var[:-1], np.nan)
    tail_ratios = ratios[len(ratios) // 2 - 1:] if ratios.size >= 3 else ratios
    constant = float(np.max(env * np.exp(t_grid)))

    if np.all(var == 0):
        verdict = "exponential"
    elif np.any(~np.isfinite(tail_ratios)) or tail_ratios.size == 0:
        verdict = "inconclusive"
    else:
        med = float(np.median(tail_ratios))
        if med >= 0.9:
            verdict = "not semi-integrable"
        elif med <= 0.75:
            good = env > 0
            slope = np.polyfit(t_grid[good], np.log(env[good]), 1)[0] if np.count_nonzero(good) > 1 else 0.0
            verdict = "exponential" if slope <= -0.5 else "semi-integrable"
        else:
            verdict = "inconclusive"
    return ProbeResult(t_grid, env, verdict, constant, ratios)


# ---------------------------------------------------------------------------
# Sampled checks of the exponential-tail bounds


@dataclass
class SweepResult:
    cases: int
    violations: int
    max_ratio: float
    records: list


def osc_bound_sweep(seed: int = 0, cases_per_alpha: int = 64,
                  alphas: Sequence[float] = (0.5, 1.0, 5.0, 20.0), max_slope: float = 5.0,
                  t_max: float = 8.0, span: float = 20.0) -> SweepResult:
    """Randomised check of ``|int_t^s cos(alpha e^tau + psi)| <= (3+L3)/(alpha e^t)``
    with linear phases ``psi(tau) = m tau + c``, ``|m| <= max_slope``."""
    rng = np.random.default_rng(seed)
    records, violations, worst = [], 0, 0.0
    for alpha in alphas:
        for _ in range(cases_per_alpha):
            m = rng.uniform(-max_slope, max_slope)
            c = rng.uniform(-math.pi, math.pi)
            t = rng.uniform(0.0, t_max)
            s = t + rng.uniform(0.0, span)
            value, bound = osc_integral(alpha, PhaseFunction.linear(m, c), t, s)
            ratio = abs(value) / bound
            worst = max(worst, ratio)
            if ratio > 1.0:
                violations += 1
            records.append((alpha, m, c, t, s, value, bound))
    return SweepResult(len(records), violations, worst, records)


@dataclass
class ProductCheck:
    L_g: float
    L_f: float
    measured: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound


def _cum_product(g: OscillatoryForcing, f: Callable, grid, tol=1e-11):
    """Cumulative ``int_{grid[0]}^{grid[i]} g f`` with exact oscillatory quadrature."""
    out = np.zeros(grid.size)
    acc = 0.0
    for i in range(1, grid.size):
        a, b = grid[i - 1], grid[i]
        piece = 0.0
        for amp, alpha, phase in g.terms:
            piece += amp * osc_product_integral(alpha, PhaseFunction.linear(0.0, phase), f, a, b, tol)
        if g.constant:
            piece += g.constant * _gauss(f, a, b)
        acc += piece
        out[i] = acc
    return out


def _sup_envelope(grid, F):
    suf_max = np.maximum.accumulate(F[::-1])[::-1]
    suf_min = np.minimum.accumulate(F[::-1])[::-1]
    return np.maximum(suf_max - F, F - suf_min)


def product_bound_check(g: OscillatoryForcing, f: Callable, df: Callable,
                        t_max: float = 6.0, s_max: float = 10.0, points: int = 401) -> ProductCheck:
    """Sampled check of ``|int_t^s g f| <= 3 L4 L5 exp(-t)``.

    ``L4`` is the sampled envelope constant of ``g`` (``sup exp(t)|int_t^s g|``)
    and ``L5 = max(|f|, |f'|)`` on the grid.
    """
    grid = np.linspace(0.0, s_max, points)
    env_g = _sup_envelope(grid, g.primitive(grid))
    L4 = float(np.max(env_g * np.exp(grid)))
    L5 = float(max(np.max(np.abs(f(grid))), np.max(np.abs(df(grid)))))
    env = _sup_envelope(grid, _cum_product(g, f, grid))
    sel = grid <= t_max
    measured = float(np.max(env[sel] * np.exp(grid[sel])))
    return ProductCheck(L4, L5, measured, 3 * L4 * L5)


def series_bound_check(gs: Sequence[OscillatoryForcing], fs: Sequence[Callable],
                       dfs: Sequence[Callable], t_max: float = 6.0, s_max: float = 10.0,
                       points: int = 401) -> ProductCheck:
    """Finite-sum version: ``|int_t^s sum_k g_k f_k| <= 3 L7 L8 exp(-t)`` with
    ``L7 = max_k`` envelope constant of ``g_k`` and ``L8 = max(sum|f_k|, sum|f_k'|)``."""
    grid = np.linspace(0.0, s_max, points)
    L7 = 0.0
    total = np.zeros(grid.size)
    sum_f = np.zeros(grid.size)
    sum_df = np.zeros(grid.size)
    for g, f, df in zip(gs, fs, dfs):
        env_g = _sup_envelope(grid, g.primitive(grid))
        L7 = max(L7, float(np.max(env_g * np.exp(grid))))
        total += _cum_product(g, f, grid)
        sum_f += np.abs(f(grid))
        sum_df += np.abs(df(grid))
    L8 = float(max(np.max(sum_f), np.max(sum_df)))
    env = _sup_envelope(grid, total)
    sel = grid <= t_max
    measured = float(np.max(env[sel] * np.exp(grid[sel])))
    return ProductCheck(L7, L8, measured, 3 * L7 * L8)


# ---------------------------------------------------------------------------
# Scalar harnesses


def _square(period):
    def xi(t):
        return 1.0 if (t % period) < period / 2 else -1.0
    return xi


ADVERSARY_SCHEDULES = {
    "plus": lambda t: 1.0,
    "minus": lambda t: -1.0,
    "square1": _square(1.0),
    "square5": _square(5.0),
}


@dataclass
class ScalarHarnessSpec:
    """Coefficients of the scalar model problems.

    Logistic inequality: ``|z' - z + z**2/z_inf - psi1| <= psi2``.
    Bernoulli equation: ``z' = alpha z (1 - z**2) + alpha beta z**3 + gamma z``.

    Coefficients are plain functions of ``t`` or :class:`OscillatoryForcing`
    objects (whose fast parts are integrated exactly).
    """

    z0: float = 1.0
    z_inf: float | None = None
    psi1: Callable | None = None
    psi2: Callable | None = None
    alpha: Callable | None = None
    beta: Callable | None = None
    gamma: Callable | None = None
    L0: float | None = None
    L1: float | None = None
    L2: float | None = None
    z_at_t0: float = 1.0
    step: float = 1.0 / 128


def _split(f):
    """Split a coefficient into (oscillatory forcing or None, smooth callable or None)."""
    if f is None:
        return None, None
    if isinstance(f, OscillatoryForcing):
        osc = OscillatoryForcing(f.terms) if f.terms else None
        const, smooth = f.constant, f.smooth
        if const == 0.0 and smooth is None:
            return osc, None
        if smooth is None:
            return osc, (lambda t, c=const: c + 0.0 * np.asarray(t))
        return osc, (lambda t, c=const, g=smooth: c + g(t))
    return None, f


def _val(f, t):
    return 0.0 if f is None else float(f(t))


def _int(f, a, b):
    if f is None:
        return 0.0
    if isinstance(f, OscillatoryForcing):
        return f.integral(a, b)
    return _gauss(f, a, b)


def _grid(t0, t_end, h):
    n = max(1, int(math.ceil((t_end - t0) / h - 1e-9)))
    return np.linspace(t0, t_end, n + 1)


@dataclass
class PropRResult:
    final: float
    converged: bool
    finals: dict
    flags: list

    def __iter__(self):
        return iter((self.final, self.converged))


def _rk4(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _logistic_run(spec: ScalarHarnessSpec, t_end: float, xi) -> float:
    z_inf = spec.z_inf
    osc1, smooth1 = _split(spec.psi1)
    grid = _grid(0.0, t_end, spec.step)
    z = float(spec.z0)

    def rhs(t, z):
        return z - z * z / z_inf + _val(smooth1, t) + xi_now * _val(spec.psi2, t)

    for a, b in zip(grid[:-1], grid[1:]):
        m = 0.5 * (a + b)
        xi_now = xi(m)
        z += _int(osc1, a, m)
        z = _rk4(rhs, a, z, b - a)
        z += _int(osc1, m, b)
        if not math.isfinite(z) or z <= 0:
            return math.nan
    return z


def prop_R_harness(spec: ScalarHarnessSpec, t_end: float,
                   schedules: dict | None = None, tol: float = 5e-3) -> PropRResult:
    """Drive ``z' = z - z**2/z_inf + psi1 + xi psi2`` with adversarial ``xi`` in ``{-1, +1}``.

    The fast part of ``psi1`` enters through exact step integrals (Strang
    splitting around an RK4 step of the smooth part).  ``final`` is the
    schedule result farthest from ``z_inf``; ``converged`` requires every
    schedule to end within ``tol`` of ``z_inf``.  Hypotheses are sampled
    first and any violation is recorded in ``flags``.
    """
    if spec.z_inf is None or not spec.z_inf > 0:
        raise InvalidArgument("z_inf must be positive")
    if not t_end > 0:
        raise InvalidArgument("t_end must be positive")
    flags = []
    if not spec.z0 > 0:
        flags.append("initial value is not positive")
    if spec.psi2 is not None:
        tail = np.linspace(0.9 * t_end, t_end, 201)
        if np.max(np.abs([_val(spec.psi2, t) for t in tail])) > 1e-3:
            flags.append("psi2 does not appear to tend to zero")
    if spec.psi1 is not None:
        probe = semi_integrability_probe(spec.psi1, np.linspace(0.0, min(t_end, 8.0) * 0.75, 16),
                                         min(t_end, 8.0))
        if probe.classification == "not semi-integrable":
            flags.append("psi1 failed the semi-integrability probe")

    schedules = schedules or (ADVERSARY_SCHEDULES if spec.psi2 is not None else {"plus": ADVERSARY_SCHEDULES["plus"]})
    finals = {name: _logistic_run(spec, t_end, xi) for name, xi in schedules.items()}
    if any(not math.isfinite(v) for v in finals.values()):
        flags.append("solution left the positive half-line")
    devs = {k: (abs(v - spec.z_inf) if math.isfinite(v) else math.inf) for k, v in finals.items()}
    worst = max(devs, key=devs.get)
    converged = all(d < tol for d in devs.values())
    return PropRResult(finals[worst], converged, finals, flags)


def bernoulli_threshold(L1: float, L2: float) -> float:
    """Smallest ``t0 >= 0`` with ``L2 (1 + 9 L1 + 32 L1**2 + 32 L1**3) exp(-t0) < log 2``
    (returned a hair above the boundary so the strict inequality holds)."""
    K = L2 * (1 + 9 * L1 + 32 * L1**2 + 32 * L1**3)
    if K < math.log(2):
        return 0.0
    t0 = math.log(K / math.log(2))
    return math.nextafter(t0, math.inf) + 1e-12


@dataclass
class BernoulliResult:
    final: float
    t0_threshold: float
    sup_after_t0: float
    flags: list

    def __iter__(self):
        return iter((self.final, self.t0_threshold, self.sup_after_t0))


def _bernoulli_run(spec: ScalarHarnessSpec, t_start: float, z_start: float, t_end: float):
    """Integrate in ``x = z**-2``: ``x' = -2 (alpha + gamma) x + 2 alpha (1 - beta)``.

    Returns the grid and ``z`` on it.
    """
    osc_b, smooth_b = _split(spec.beta)
    osc_g, smooth_g = _split(spec.gamma)
    alpha = spec.alpha
    grid = _grid(t_start, t_end, spec.step)
    z = np.empty(grid.size)
    z[0] = z_start
    x = z_start**-2.0

    def rhs(t, x):
        a = _val(alpha, t)
        return -2.0 * (a + _val(smooth_g, t)) * x + 2.0 * a * (1.0 - _val(smooth_b, t))

    def fast(x, a, b):
        if osc_b is None and osc_g is None:
            return x
        am = _val(alpha, 0.5 * (a + b))
        return x * math.exp(-2.0 * _int(osc_g, a, b)) - 2.0 * am * _int(osc_b, a, b)

    for i, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
        m = 0.5 * (a + b)
        x = fast(x, a, m)
        x = _rk4(rhs, a, x, b - a)
        x = fast(x, m, b)
        z[i + 1] = x**-0.5 if x > 0 else math.inf
    return grid, z


def bernoulli_harness(spec: ScalarHarnessSpec, t_end: float) -> BernoulliResult:
    """Bernoulli-equation harness.

    ``final`` is ``z(t_end)`` from ``z(0) = z0``.  When ``L1`` and ``L2`` are
    given, ``t0`` is the threshold from :func:`bernoulli_threshold` and
    ``sup_after_t0`` is ``max z`` on ``[t0, t_end]`` started from
    ``z(t0) = z_at_t0``.  Hypotheses are sampled and violations flagged.
    """
    if spec.alpha is None:
        raise InvalidArgument("alpha is required")
    if not t_end > 0:
        raise InvalidArgument("t_end must be positive")
    flags = _bernoulli_flags(spec, t_end)
    if not spec.z0 > 0:
        flags.append("initial value is not positive")
        final = math.nan
    else:
        _, z = _bernoulli_run(spec, 0.0, float(spec.z0), t_end)
        final = float(z[-1])

    t0, sup = math.nan, math.nan
    if spec.L1 is not None and spec.L2 is not None:
        t0 = bernoulli_threshold(spec.L1, spec.L2)
        if t0 < t_end:
            if spec.z_at_t0 > 1:
                flags.append("z(t0) exceeds 1: the threshold guarantee does not apply")
            _, z = _bernoulli_run(spec, t0, float(spec.z_at_t0), t_end)
            sup = float(np.max(z))
        else:
            flags.append("threshold t0 lies beyond t_end")
    return BernoulliResult(final, t0, sup, flags)


def _bernoulli_flags(spec: ScalarHarnessSpec, t_end: float) -> list:
    flags = []
    grid = np.linspace(0.0, t_end, 4001)
    a = np.array([_val(spec.alpha, t) for t in grid])
    if np.any(a <= 0):
        flags.append("alpha is not positive everywhere")
    da = np.gradient(a, grid)
    if spec.L0 is not None and np.any(np.abs(da) > spec.L0 * a * (1 + 1e-6) + 1e-12):
        flags.append("|alpha'| exceeds L0 * alpha")
    if spec.L1 is not None:
        window = grid[grid <= min(t_end, 10.0)]
        b = np.abs([_val(spec.beta, t) for t in window])
        g = np.abs([_val(spec.gamma, t) for t in window])
        big = max(np.max(a), np.max(np.abs(da)), np.max(b, initial=0), np.max(g, initial=0))
        if big > spec.L1 * (1 + 1e-9):
            flags.append("coefficients exceed L1")
    if spec.L2 is not None:
        s_max = min(t_end, 10.0)
        for name, f in (("beta", spec.beta), ("gamma", spec.gamma)):
            if f is None:
                continue
            probe = semi_integrability_probe(f, np.linspace(0.0, 0.8 * s_max, 41), s_max)
            if probe.constant > spec.L2 * (1 + 1e-9):
                flags.append(f"partial integrals of {name} exceed L2*exp(-t) "
                             f"(sampled constant {probe.constant:.3g})")
    return flags
