"""Integration of the full modal system and checks along computed trajectories.

Each mode obeys ``u_k'' + D u_k' + lambda_k**2 u_k = 0`` with the shared
damping ``D = sum_i u_i'**2``.  Two schemes are available:

``adaptive_rk``
    Dormand-Prince 5(4) on ``(u, u')``.
``rotating_frame``
    The same pair applied to the slow amplitudes
    ``a_k = exp(i lambda_k t)(lambda_k u_k + i u_k')``, which satisfy
    ``a_k' = -i D u_k' exp(i lambda_k t)``.  The right side is ``O(|a|**3)``,
    so the controller takes much longer steps once the energy has decayed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _dopri
from .errors import DegenerateInput, IntegrationFailure, InvalidArgument, NeedsDenserSampling
from .spectral import (
    ModalState,
    ModeSet,
    Spectrum,
    Trajectory,
    ordered_sum,
    polar_arrays,
    support,
)

__all__ = [
    "Sampler",
    "IntegratorConfig",
    "ReductionResidualReport",
    "integrate_full",
    "verify_energy_identity",
    "energy_increase_violations",
    "fit_decay",
    "verify_polar_reduction",
    "reduction_coefficients",
    "scheme_discrepancy",
]

SCHEMES = ("adaptive_rk", "rotating_frame")


@dataclass(frozen=True)
class Sampler:
    """Output grid.

    ``log_spaced``: ``count`` times with ``log(1+t)`` uniform on ``[log(1+t0), log(1+t_end)]``.
    ``dyadic``: uniform grid ``t0 + i * 2**-level``; raising the level by one
    halves the spacing and the coarser grid is a subset of the finer one.
    """

    kind: str = "log_spaced"
    count: int = 1000
    level: int = 4

    def __post_init__(self):
        if self.kind not in ("log_spaced", "dyadic"):
            raise InvalidArgument(f"unknown sampler {self.kind!r}")
        if self.kind == "log_spaced" and self.count < 2:
            raise InvalidArgument("log_spaced sampler needs count >= 2")

    @classmethod
    def log_spaced(cls, count: int) -> "Sampler":
        return cls("log_spaced", count=int(count))

    @classmethod
    def dyadic(cls, level: int) -> "Sampler":
        return cls("dyadic", level=int(level))

    @property
    def spacing(self) -> float:
        return 2.0 ** -self.level

    def grid(self, t0: float, t_end: float) -> np.ndarray:
        if self.kind == "log_spaced":
            grid = np.expm1(np.linspace(math.log1p(t0), math.log1p(t_end), self.count))
            grid[0], grid[-1] = t0, t_end
            return grid
        n = int(math.floor((t_end - t0) / self.spacing + 1e-9))
        grid = t0 + np.arange(n + 1) * self.spacing
        if grid[-1] < t_end * (1 - 1e-14):
            grid = np.append(grid, t_end)
        return grid


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_step: float = math.inf
    t_end: float = 1e3
    sampler: Sampler = field(default_factory=Sampler)
    scheme: str = "adaptive_rk"
    max_steps: int = 500_000_000

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (0 < v <= 1e-2):
                raise InvalidArgument(f"{name} must lie in (0, 1e-2], got {v!r}")
        if not self.max_step > 0:
            raise InvalidArgument("max_step must be positive")
        if not (self.t_end > 0 and math.isfinite(self.t_end)):
            raise InvalidArgument("t_end must be positive and finite")
        if self.scheme not in SCHEMES:
            raise InvalidArgument(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")

    def to_dict(self) -> dict:
        return {
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_step": self.max_step,
            "t_end": self.t_end,
            "sampler": {"kind": self.sampler.kind, "count": self.sampler.count,
                        "level": self.sampler.level},
            "scheme": self.scheme,
        }


def integrate_full(initial: ModalState, spec: Spectrum, cfg: IntegratorConfig) -> Trajectory:
    """Integrate the modal system from ``initial`` to ``cfg.t_end``.

    Modes outside the support of the initial data stay exactly zero: their
    right sides vanish identically and the output is masked as well.
    """
    lam = np.ascontiguousarray(spec.lambdas, dtype=float)
    n = lam.size
    if len(initial) != n:
        raise InvalidArgument(f"initial state has {len(initial)} modes, spectrum {n}")
    t0 = initial.t
    if cfg.t_end <= t0:
        raise InvalidArgument("t_end must exceed the initial time")
    t_out = cfg.sampler.grid(t0, cfg.t_end)
    active = support(initial.u, initial.du).mask(n)
    period = 2 * math.pi / lam[-1]

    if cfg.scheme == "adaptive_rk":
        y0 = np.concatenate([initial.u, initial.du])
        kind, weights = _dopri.RHS_MODAL, lam
        max_step = min(cfg.max_step, period / 4)
    else:
        a0 = np.exp(1j * lam * t0) * (lam * initial.u + 1j * initial.du)
        y0 = np.concatenate([a0.real, a0.imag])
        kind, weights = _dopri.RHS_ROTATING, np.ones(n)
        max_step = min(cfg.max_step, period / 2)

    Y, written, status, t_reached, _, n_acc, n_rej = _dopri.integrate(
        kind, float(t0), y0, lam, t_out, cfg.rel_tol, cfg.abs_tol, max_step, 0.0,
        1, weights, 0.0, 1, cfg.max_steps,
    )

    if cfg.scheme == "adaptive_rk":
        u, du = Y[:, :n], Y[:, n:]
    else:
        b = np.exp(-1j * lam * t_out[:, None]) * (Y[:, :n] + 1j * Y[:, n:])
        u, du = b.real / lam, b.imag
    u = np.where(active, u, 0.0)
    du = np.where(active, du, 0.0)

    meta = {
        "scheme": cfg.scheme,
        "rel_tol": cfg.rel_tol,
        "abs_tol": cfg.abs_tol,
        "steps_accepted": int(n_acc),
        "steps_rejected": int(n_rej),
        "status": _dopri.STATUS_TEXT[int(status)],
    }
    if status != _dopri.OK:
        partial = None
        if written > 0:
            partial = Trajectory("modal", t_out[:written], u=u[:written], du=du[:written],
                                 spectrum=spec, meta=meta)
        raise IntegrationFailure(
            f"{cfg.scheme} integration stopped at t={t_reached:.6g}: "
            f"{_dopri.STATUS_TEXT[int(status)]}",
            partial=partial,
        )
    return Trajectory("modal", t_out, u=u, du=du, spectrum=spec, meta=meta)


# ---------------------------------------------------------------------------
# Energy checks


def _require_modal(traj: Trajectory):
    if traj.kind != "modal":
        raise InvalidArgument("expected a modal trajectory")


def verify_energy_identity(traj: Trajectory) -> float:
    """Largest defect of ``E' = -2 |u'|**4`` over adjacent sample pairs.

    For each pair the difference quotient of ``E`` is compared with the
    trapezoidal mean of ``-2 |u'|**4``; the result is normalised by ``E(0)``.
    """
    _require_modal(traj)
    if len(traj) < 2:
        raise InvalidArgument("need at least two samples")
    E = traj.energy
    if E[0] == 0.0:
        return 0.0
    q = ordered_sum(traj.du**2) ** 2
    dt = np.diff(traj.times)
    residual = np.diff(E) / dt + (q[1:] + q[:-1])
    return float(np.max(np.abs(residual)) / E[0])


def energy_increase_violations(traj: Trajectory, rel_tol: float | None = None) -> np.ndarray:
    """Indices ``n`` with ``E[n+1] > E[n] * (1 + 10 rel_tol)``."""
    _require_modal(traj)
    if rel_tol is None:
        rel_tol = float(traj.meta.get("rel_tol", 0.0))
    E = traj.energy
    return np.flatnonzero(E[1:] > E[:-1] * (1 + 10 * rel_tol))


def fit_decay(traj: Trajectory) -> tuple[float, float, float]:
    """Return ``(M1, M2, slope)``.

    ``M1``/``M2`` are the min/max of ``(1+t) E`` over all samples.  ``slope``
    is the least-squares slope of ``log E`` against ``log(1+t)`` over the last
    decade of ``1+t``.
    """
    if len(traj) < 2:
        raise InvalidArgument("need at least two samples")
    E = traj.energy
    if not np.any(E > 0):
        raise DegenerateInput("energy vanishes identically; nothing to fit")
    tau = 1.0 + traj.t
    if tau[-1] < 100.0 * tau[0]:
        raise InvalidArgument("trajectory must span at least two decades of 1+t")
    R = tau * E
    last = tau >= tau[-1] / 10.0
    if np.count_nonzero(last) < 2 or np.any(E[last] <= 0):
        raise DegenerateInput("not enough positive samples in the last decade")
    slope = np.polyfit(np.log(tau[last]), np.log(E[last]), 1)[0]
    return float(np.min(R)), float(np.max(R)), float(slope)


def scheme_discrepancy(a: Trajectory, b: Trajectory) -> float:
    """Max relative difference of ``(1+t) E`` between two runs on their common times."""
    common, ia, ib = np.intersect1d(a.t, b.t, return_indices=True)
    if common.size == 0:
        raise InvalidArgument("trajectories share no sample times")
    ra, rb = a.rescaled_energy[ia], b.rescaled_energy[ib]
    scale = np.maximum(np.abs(ra), np.abs(rb))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, np.abs(ra - rb) / scale, 0.0)
    return float(np.max(rel))


# ---------------------------------------------------------------------------
# Polar reduction


@dataclass(frozen=True)
class ReductionResidualReport:
    """Residuals of the amplitude/phase equations along a trajectory.

    ``rho_residual[i]`` and ``theta_residual[i]`` are sup norms over the
    support at sample ``i``.  ``M5`` bounds ``(1+t)**2 (|g1| + |g2|)``,
    ``M7`` bounds ``exp(s) max(|Gamma1|, |Gamma2|)``, ``M3``/``M4`` bracket
    ``R = sum rho**2``.  ``g_envelope_slope`` is the log-log slope of the
    binned maximum of ``|g1| + |g2|`` over the last decade of ``1+t``.
    """

    modes: ModeSet
    times: np.ndarray
    rho_residual: np.ndarray
    theta_residual: np.ndarray
    M5: float
    M7: float
    M3: float
    M4: float
    g_envelope_slope: float

    @property
    def rho_sup(self) -> float:
        return float(np.max(self.rho_residual))

    @property
    def theta_sup(self) -> float:
        return float(np.max(self.theta_residual))


def reduction_coefficients(t, u, du, lambdas):
    """Closed-form ``g1, g2`` (per sample) and ``gamma, Gamma1, Gamma2`` (per sample and mode).

    With ``tau = 1+t``, ``v = sqrt(tau) u`` and ``v' = u/(2 sqrt(tau)) + sqrt(tau) u'``::

        g1 = -3/(4 tau**2) + |v'|**2/(2 tau**2) - <v,v'>/(2 tau**3) + |v|**2/(8 tau**4)
        g2 = <v,v'>/tau**2 - |v|**2/(4 tau**3)
        gamma_k = g1 cos(theta_k)/lambda_k + g2 sin(theta_k)
        Gamma1_k = tau gamma_k sin(theta_k),  Gamma2_k = tau gamma_k cos(theta_k)
    """
    tau = 1.0 + np.asarray(t, dtype=float)
    root = np.sqrt(tau)[:, None]
    v = root * u
    dv = u / (2 * root) + root * du
    vv = ordered_sum(v * v)
    vdv = ordered_sum(v * dv)
    dvdv = ordered_sum(dv * dv)
    g1 = -0.75 / tau**2 + dvdv / (2 * tau**2) - vdv / (2 * tau**3) + vv / (8 * tau**4)
    g2 = vdv / tau**2 - vv / (4 * tau**3)
    _, theta = polar_arrays(t, u, du, lambdas)
    c, s = np.cos(theta), np.sin(theta)
    gamma = g1[:, None] * c / lambdas + g2[:, None] * s
    Gamma1 = tau[:, None] * gamma * s
    Gamma2 = tau[:, None] * gamma * c
    return g1, g2, gamma, Gamma1, Gamma2


def _envelope_slope(tau, y, bins=10):
    """Slope of log(max y per log-bin) against log(bin centre) over the last decade."""
    lt = np.log(tau)
    lo = lt[-1] - math.log(10.0)
    edges = np.linspace(lo, lt[-1], bins + 1)
    xs, ys = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (lt >= a) & (lt <= b)
        if np.count_nonzero(sel) and np.max(y[sel]) > 0:
            xs.append(0.5 * (a + b))
            ys.append(math.log(np.max(y[sel])))
    if len(xs) < 2:
        return math.nan
    return float(np.polyfit(xs, ys, 1)[0])


def verify_polar_reduction(traj: Trajectory, spec: Spectrum | None = None) -> ReductionResidualReport:
    """Check the amplitude/phase equations in log-time ``s`` along ``traj``::

        rho_k'   = -(S - 1) rho_k sin(theta_k)**2 + Gamma1_k rho_k
        theta_k' = -lambda_k exp(s) - (S - 1) sin(theta_k) cos(theta_k) + Gamma2_k

    with ``S = sum_i rho_i**2 sin(theta_i)**2``.  Derivatives are second-order
    central differences on the sample grid (one-sided second order at the
    ends); phases are unwrapped first, so samples must resolve the fastest
    rotation.  Modes outside the support are excluded.
    """
    _require_modal(traj)
    spec = spec or traj.spectrum
    lam = spec.lambdas
    modes = traj.support
    if len(modes) == 0:
        raise DegenerateInput("empty support: no amplitudes to check")
    if len(traj) < 3:
        raise InvalidArgument("need at least three samples")
    idx = np.array(modes.indices)
    t = traj.t
    tau = 1.0 + t
    rho, theta = traj.polar
    dt = np.diff(t)
    if np.any(lam[idx][None, :] * dt[:, None] >= math.pi):
        raise NeedsDenserSampling("sample spacing does not resolve the phase rotation")
    # track the phase continuously: remove the known rotation before unwrapping
    theta_u = np.unwrap(theta[:, idx] + lam[idx] * t[:, None], axis=0) - lam[idx] * t[:, None]

    g1, g2, gamma, G1, G2 = reduction_coefficients(t, traj.u, traj.du, lam)
    sin, cos = np.sin(theta), np.cos(theta)
    S = ordered_sum((rho * sin) ** 2)

    drho = tau[:, None] * np.gradient(rho[:, idx], t, axis=0, edge_order=2)
    dtheta = tau[:, None] * np.gradient(theta_u, t, axis=0, edge_order=2)
    rhs_rho = -(S - 1)[:, None] * rho[:, idx] * sin[:, idx] ** 2 + G1[:, idx] * rho[:, idx]
    rhs_theta = (-lam[idx] * tau[:, None] - (S - 1)[:, None] * sin[:, idx] * cos[:, idx]
                 + G2[:, idx])
    res_rho = np.max(np.abs(drho - rhs_rho), axis=1)
    res_theta = np.max(np.abs(dtheta - rhs_theta), axis=1)

    gsum = np.abs(g1) + np.abs(g2)
    R = ordered_sum(rho**2)
    return ReductionResidualReport(
        modes=modes,
        times=t.copy(),
        rho_residual=res_rho,
        theta_residual=res_theta,
        M5=float(np.max(tau**2 * gsum)),
        M7=float(np.max(tau * np.max(np.maximum(np.abs(G1), np.abs(G2))[:, idx], axis=1))),
        M3=float(np.min(R)),
        M4=float(np.max(R)),
        g_envelope_slope=_envelope_slope(tau, gsum),
    )
