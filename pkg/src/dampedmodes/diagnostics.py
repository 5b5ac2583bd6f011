"""Post-processing of trajectories into the quantities whose long-time limits are known."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NeedsDenserSampling
from .spectral import ModeSet, Spectrum, Trajectory, modal_trajectory

__all__ = [
    "Band",
    "RescaledEnergySeries",
    "PhaseDriftSeries",
    "ProfileSpec",
    "rescaled_energy_series",
    "trailing_band",
    "quotient_series",
    "reference_index",
    "equipartition_index",
    "window_average",
    "phase_drift",
    "profile_from_drift",
    "synthesize_from_profile",
    "profile_error",
]


@dataclass(frozen=True)
class Band:
    lo: float
    hi: float

    def within(self, lo: float, hi: float) -> bool:
        return lo <= self.lo and self.hi <= hi

    def as_list(self):
        return [self.lo, self.hi]


def _trailing_mask(t: np.ndarray, decades: float) -> np.ndarray:
    tau = 1.0 + t
    return tau >= tau[-1] * 10.0 ** -decades


def trailing_band(t, values, decades: float = 1.0) -> Band:
    """Min/max of ``values`` over the last ``decades`` decades of ``1+t``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    sel = _trailing_mask(t, decades)
    return Band(float(np.min(v[sel])), float(np.max(v[sel])))


@dataclass(frozen=True)
class RescaledEnergySeries:
    t: np.ndarray
    values: np.ndarray
    band: Band

    def pairs(self):
        return list(zip(self.t.tolist(), self.values.tolist()))


def rescaled_energy_series(traj: Trajectory, decades: float = 1.0) -> RescaledEnergySeries:
    """``(t, (1+t) E(t))`` with the trailing-window band.

    For averaged runs ``t = exp(s) - 1`` and the value is ``R(s)``.
    """
    if len(traj) == 0:
        raise InvalidArgument("empty trajectory")
    values = np.asarray(traj.rescaled_energy, dtype=float)
    return RescaledEnergySeries(traj.t, values, trailing_band(traj.t, values, decades))


# ---------------------------------------------------------------------------
# Quotients and equipartition


def _amplitudes(traj: Trajectory) -> np.ndarray:
    return traj.polar[0]


def _check_in_support(traj: Trajectory, *indices):
    supp = traj.support
    for k in indices:
        if int(k) not in supp:
            raise InvalidArgument(f"mode {k} is not in the support {supp.indices}")


def reference_index(traj: Trajectory, t0: float = 0.0) -> int:
    """Mode with the largest amplitude at the sample nearest ``t0``."""
    i = int(np.argmin(np.abs(traj.t - t0)))
    rho = _amplitudes(traj)[i]
    return int(np.argmax(rho))


def quotient_series(traj: Trajectory, h: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """``(t, rho_k / rho_h)`` from the polar amplitudes."""
    _check_in_support(traj, h, k)
    rho = _amplitudes(traj)
    if h == k:
        return traj.t, np.ones(len(traj))
    return traj.t, rho[:, k] / rho[:, h]


def window_average(t: np.ndarray, values: np.ndarray, width: float) -> np.ndarray:
    """Trailing average of piecewise-linear ``values`` over ``[t_i - width, t_i]``.

    Near the start the window is clipped to the first sample.  Columns of a
    2-D ``values`` are averaged independently.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    if v.ndim == 1:
        return window_average(t, v[:, None], width)[:, 0]
    steps = np.diff(t)[:, None] * 0.5 * (v[1:] + v[:-1])
    C = np.vstack([np.zeros((1, v.shape[1])), np.cumsum(steps, axis=0)])
    start = np.maximum(t - width, t[0])
    out = np.empty_like(v)
    for j in range(v.shape[1]):
        c_start = np.interp(start, t, C[:, j])
        # value of the linear interpolant at the window start, for the partial interval
        span = t - start
        with np.errstate(invalid="ignore", divide="ignore"):
            out[:, j] = np.where(span > 0, (C[:, j] - c_start) / span, v[:, j])
    return out


def equipartition_index(traj: Trajectory, J: ModeSet) -> tuple[np.ndarray, np.ndarray]:
    """``(t, max_k / min_k)`` of the window-averaged ``(1+t) e_k`` over ``k in J``.

    Modal runs average over one period ``2 pi / lambda_min`` of the slowest
    mode in ``J``; averaged runs carry no oscillation and use ``rho_k**2`` as is.
    """
    if len(J) == 0:
        raise InvalidArgument("J must be nonempty")
    _check_in_support(traj, *J.indices)
    idx = list(J.indices)
    scaled = traj.rescaled_modal_energy[:, idx]
    if traj.kind == "modal":
        width = 2.0 * math.pi / float(np.min(traj.spectrum.lambdas[idx]))
        scaled = window_average(traj.t, scaled, width)
    return traj.t, np.max(scaled, axis=1) / np.min(scaled, axis=1)


# ---------------------------------------------------------------------------
# Phase drift and profile


@dataclass(frozen=True)
class PhaseDriftSeries:
    """Unwrapped ``phi_k(t) + lambda_k t`` and its oscillation on dyadic trailing windows.

    Window ``m`` covers ``(1+t_end)/2**(m+1) <= 1+t <= (1+t_end)/2**m``;
    ``windows[0]`` is the final one.  ``variations[m]`` is ``max - min`` of the
    drift there.
    """

    k: int
    t: np.ndarray
    drift: np.ndarray
    windows: tuple
    variations: np.ndarray

    @property
    def final_variation(self) -> float:
        return float(self.variations[0])

    @property
    def limit(self) -> float:
        """Median drift over the final window."""
        lo, hi = self.windows[0]
        sel = (self.t >= lo) & (self.t <= hi)
        return float(np.median(self.drift[sel]))

    @property
    def theta_inf(self) -> float:
        """Phase in the profile ``cos(lambda t + theta_inf)``; it is minus the drift limit."""
        return -self.limit


def phase_drift(traj: Trajectory, k: int, t0: float = 0.0, max_windows: int = 8) -> PhaseDriftSeries:
    """Drift of the phase of mode ``k`` relative to the free rotation ``-lambda_k t``.

    The rotation is removed analytically before unwrapping, so only the slow
    drift has to be resolved by the samples.  If any wrapped step of the
    drift exceeds ``pi/2`` the unwrapping is ambiguous and
    :class:`NeedsDenserSampling` is raised.
    """
    if traj.kind != "modal":
        raise InvalidArgument("phase drift needs a modal trajectory")
    _check_in_support(traj, k)
    sel = traj.t >= t0
    if np.count_nonzero(sel) < 2:
        raise InvalidArgument("fewer than two samples after t0")
    t = traj.t[sel]
    theta = traj.polar[1][sel, k]
    lam = float(traj.spectrum.lambdas[k])
    raw = theta + lam * t
    step = np.angle(np.exp(1j * np.diff(raw)))
    if np.any(np.abs(step) > math.pi / 2):
        raise NeedsDenserSampling(
            f"phase of mode {k} changes by up to {np.max(np.abs(step)):.3g} rad between samples"
        )
    drift = raw[0] + np.concatenate([[0.0], np.cumsum(step)])

    tau_end = 1.0 + t[-1]
    windows, variations = [], []
    for m in range(max_windows):
        hi, lo = tau_end / 2**m - 1.0, tau_end / 2 ** (m + 1) - 1.0
        if hi <= t[0]:
            break
        w = (t >= max(lo, t[0])) & (t <= hi)
        if np.count_nonzero(w) == 0:
            break
        windows.append((max(lo, float(t[0])), hi))
        variations.append(float(np.ptp(drift[w])))
    return PhaseDriftSeries(k, t, drift, tuple(windows), np.array(variations))


@dataclass(frozen=True)
class ProfileSpec:
    """``v_inf(t) = sum_k amplitude_k cos(lambda_k t + phase_k) e_k`` over the support.

    ``amplitude_k = 2/sqrt(2j+1) / lambda_k``; ``v_inf`` solves ``v'' + A v = 0``.
    """

    support: ModeSet
    lambdas: np.ndarray
    phases: np.ndarray
    n_modes: int

    @property
    def amplitudes(self) -> np.ndarray:
        j = len(self.support)
        return 2.0 / math.sqrt(2 * j + 1) / self.lambdas

    @classmethod
    def build(cls, spec: Spectrum, J: ModeSet, phases) -> "ProfileSpec":
        if len(J) == 0:
            raise InvalidArgument("profile needs a nonempty support")
        lam = spec.lambdas[list(J.indices)].copy()
        phases = np.asarray(phases, dtype=float).ravel()
        if phases.size != len(J):
            raise InvalidArgument("one phase per supported mode")
        return cls(J, lam, phases, len(spec))

    def evaluate(self, t) -> tuple[np.ndarray, np.ndarray]:
        """``(v_inf, v_inf')`` with shape ``(len(t), n_modes)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        arg = self.lambdas * t[:, None] + self.phases
        v = np.zeros((t.size, self.n_modes))
        dv = np.zeros((t.size, self.n_modes))
        idx = list(self.support.indices)
        v[:, idx] = self.amplitudes * np.cos(arg)
        dv[:, idx] = -self.amplitudes * self.lambdas * np.sin(arg)
        return v, dv


def profile_from_drift(traj: Trajectory, t0: float = 0.0) -> ProfileSpec:
    """Profile with phases ``theta_inf`` estimated from the final-window drift medians."""
    J = traj.support
    phases = [phase_drift(traj, k, t0).theta_inf for k in J.indices]
    return ProfileSpec.build(traj.spectrum, J, phases)


def synthesize_from_profile(profile: ProfileSpec, spec: Spectrum, times) -> Trajectory:
    """Trajectory with ``u = v_inf/sqrt(t)`` and ``u' = v_inf'/sqrt(t)`` (times must be positive)."""
    times = np.asarray(times, dtype=float)
    if np.any(times <= 0):
        raise InvalidArgument("synthesised samples need t > 0")
    v, dv = profile.evaluate(times)
    root = np.sqrt(times)[:, None]
    return modal_trajectory(times, v / root, dv / root, spec, source="profile")


def profile_error(traj: Trajectory, profile: ProfileSpec) -> tuple[np.ndarray, np.ndarray]:
    """``(t, |sqrt(t) u' - v_inf'|**2 + |sqrt(t) u - v_inf|**2)``."""
    if traj.kind != "modal":
        raise InvalidArgument("profile error needs a modal trajectory")
    if traj.support != profile.support:
        raise InvalidArgument(
            f"profile support {profile.support.indices} differs from trajectory "
            f"support {traj.support.indices}"
        )
    v, dv = profile.evaluate(traj.t)
    root = np.sqrt(traj.t)[:, None]
    err = np.sum((root * traj.du - dv) ** 2, axis=1) + np.sum((root * traj.u - v) ** 2, axis=1)
    return traj.t, err
