"""Averaged (homogenised) amplitude flow.

Replacing the oscillating factors in the amplitude equations by their time
averages leaves the autonomous system

    rho_k' = rho_k (1/2 - rho_k**2/8 - R/4),   R = sum_i rho_i**2,

which is the gradient flow ``rho' = -grad F(rho)`` of

    F(rho) = -1/4 sum rho**2 + 1/16 (sum rho**2)**2 + 1/32 sum rho**4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _dopri
from .errors import IntegrationFailure, InvalidArgument
from .spectral import ModeSet, Trajectory, ordered_sum

__all__ = [
    "AveragedState",
    "StationaryProfile",
    "AveragedIdentityReport",
    "functional_F",
    "grad_F",
    "rhs_averaged",
    "integrate_averaged",
    "stationary_profile",
    "verify_averaged_identities",
    "lyapunov_violations",
]

STOP_RHS = 1e-12
STOP_COUNT = 10


@dataclass(frozen=True)
class AveragedState:
    rho: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        rho = np.array(self.rho, dtype=float).ravel()
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise InvalidArgument("amplitudes must be finite and nonnegative")
        if not self.s >= 0:
            raise InvalidArgument("flow time must be nonnegative")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "s", float(self.s))

    def __len__(self):
        return self.rho.size


def _rho(x) -> np.ndarray:
    return x.rho if isinstance(x, AveragedState) else np.asarray(x, dtype=float)


def functional_F(rho):
    """``F`` of one amplitude vector, or of each row of a 2-D array."""
    r = _rho(rho)
    sq = r * r
    total = ordered_sum(sq)
    value = -0.25 * total + total * total / 16.0 + ordered_sum(sq * sq) / 32.0
    return float(value) if np.ndim(value) == 0 else value


def grad_F(rho) -> np.ndarray:
    """``dF/drho_k = -rho_k/2 + rho_k R/4 + rho_k**3/8``."""
    r = _rho(rho)
    R = ordered_sum(r * r)
    return -r / 2.0 + r * R / 4.0 + r**3 / 8.0


def rhs_averaged(rho) -> np.ndarray:
    return -grad_F(rho)


@dataclass(frozen=True)
class StationaryProfile:
    """Nontrivial equilibrium supported on ``J``: every ``rho_k = 2/sqrt(2j+1)`` on ``J``."""

    support: ModeSet
    amplitude: float
    energy: float

    @property
    def defined(self) -> bool:
        return len(self.support) > 0

    def vector(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        if self.defined:
            out[list(self.support.indices)] = self.amplitude
        return out


def stationary_profile(J: ModeSet) -> StationaryProfile:
    j = len(J)
    if j == 0:
        return StationaryProfile(J, math.nan, 0.0)
    return StationaryProfile(J, 2.0 / math.sqrt(2 * j + 1), 4.0 * j / (2 * j + 1))


def integrate_averaged(initial, s_end: float, tol: float = 1e-8, count: int | None = None,
                       stop_rhs: float = STOP_RHS) -> Trajectory:
    """Integrate the averaged flow on a uniform grid in ``s``.

    ``count`` samples (default: spacing 0.01) span ``[s0, s_end]``; steps never
    exceed the sample spacing, so samples are as accurate as step ends.  Once
    ``max|rho'| < stop_rhs`` for ten consecutive accepted steps the run stops
    and the remaining samples repeat the final state; ``meta['stopped_at']``
    records where.  ``stop_rhs=0`` disables the early stop.
    """
    if not isinstance(initial, AveragedState):
        initial = AveragedState(initial)
    s0 = initial.s
    if not s_end > s0:
        raise InvalidArgument("s_end must exceed the initial flow time")
    if not (0 < tol <= 1e-2):
        raise InvalidArgument("tol must lie in (0, 1e-2]")
    if count is None:
        count = int(round((s_end - s0) / 0.01)) + 1
    if count < 2:
        raise InvalidArgument("need at least two samples")
    s_out = np.linspace(s0, s_end, count)
    y0 = initial.rho.copy()
    if y0.size == 0:
        raise InvalidArgument("empty amplitude vector")
    Y, written, status, s_reached, y_end, n_acc, n_rej = _dopri.integrate(
        _dopri.RHS_AVERAGED, s0, y0, np.zeros(1), s_out, tol, tol * 1e-4, s_out[1] - s_out[0], 0.0,
        0, np.ones(1), float(stop_rhs), STOP_COUNT, 50_000_000,
    )
    meta = {"tol": tol, "steps_accepted": int(n_acc), "steps_rejected": int(n_rej),
            "status": _dopri.STATUS_TEXT[int(status)], "stopped_at": None}
    if status == _dopri.CONVERGED:
        Y[written:] = y_end
        meta["stopped_at"] = float(s_reached)
    elif status != _dopri.OK:
        partial = None
        if written:
            partial = Trajectory("averaged", s_out[:written], rho=Y[:written], meta=meta)
        raise IntegrationFailure(
            f"averaged flow stopped at s={s_reached:.6g}: {_dopri.STATUS_TEXT[int(status)]}",
            partial=partial,
        )
    # round-off can leave -0.0 or a sub-ulp negative on a decaying mode
    Y = np.maximum(Y, 0.0)
    return Trajectory("averaged", s_out, rho=Y, meta=meta)


def lyapunov_violations(traj: Trajectory, slack: float) -> np.ndarray:
    """Sample indices where ``F`` rises by more than ``slack`` from the previous sample."""
    F = functional_F(traj.rho)
    return np.flatnonzero(np.diff(F) > slack)


@dataclass
class AveragedIdentityReport:
    r_residual: float
    q_residual: float | None
    reference: int
    r_trailing_min: float
    r_trailing_max: float
    window_ok: bool
    notices: list = field(default_factory=list)


def verify_averaged_identities(traj: Trajectory, slack: float = 1e-7) -> AveragedIdentityReport:
    """Finite-difference residuals of the energy and quotient laws along an averaged run::

        R' = R - R**2/2 - 1/4 sum rho**4
        Q_{h,k}' = 1/8 rho_h**2 Q (1 - Q**2),   Q_{h,k} = rho_k / rho_h

    ``h`` is the largest mode at the first sample.  The trailing half of a
    nontrivial run must keep ``R`` inside ``[4/3, 2]`` (up to ``slack``).
    """
    if traj.kind != "averaged":
        raise InvalidArgument("expected an averaged trajectory")
    if len(traj) < 3:
        raise InvalidArgument("need at least three samples")
    s = traj.times
    rho = traj.rho
    R = traj.rescaled_energy
    quart = ordered_sum(rho**4)
    dR = np.gradient(R, s, edge_order=2)
    r_res = float(np.max(np.abs(dR - (R - R * R / 2.0 - quart / 4.0))))

    notices = []
    active = np.flatnonzero(rho[0] > 0)
    h = int(np.argmax(rho[0]))
    q_res = None
    others = [k for k in active if k != h]
    if not others:
        notices.append("quotient check skipped: fewer than two active modes")
    else:
        Q = rho[:, others] / rho[:, [h]]
        dQ = np.gradient(Q, s, axis=0, edge_order=2)
        law = (rho[:, [h]] ** 2 / 8.0) * Q * (1.0 - Q * Q)
        q_res = float(np.max(np.abs(dQ - law)))

    tail = s >= s[0] + 0.5 * (s[-1] - s[0])
    lo, hi = float(np.min(R[tail])), float(np.max(R[tail]))
    if active.size == 0:
        notices.append("trivial run: energy window not applicable")
        window_ok = True
    else:
        window_ok = bool(lo >= 4.0 / 3.0 - slack and hi <= 2.0 + slack)
    return AveragedIdentityReport(r_res, q_res, h, lo, hi, window_ok, notices)
