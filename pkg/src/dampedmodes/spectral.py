"""Spectra, modal and polar states, trajectories and the elementary energies.

Conventions
-----------
Frequencies are 1-based in the mathematical sense, ``lambda_1 <= lambda_2 <= ...``,
and are stored in a 0-based array: array position ``i`` holds ``lambda_{i+1}``.
Mode sets (:class:`ModeSet`) hold array positions.  File outputs label the
column of position ``i`` as ``e_{i+1}``.

The operator ``A`` is diagonal with eigenvalues ``lambda_k**2``, so a modal
state is a pair of arrays ``(u, du)`` and the classical energy is
``sum(du**2 + lambda**2 * u**2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "Spectrum",
    "ModalState",
    "PolarState",
    "ModeSet",
    "Trajectory",
    "make_spectrum",
    "classical_energy",
    "to_polar",
    "from_polar",
    "polar_arrays",
    "support",
    "ordered_sum",
]

_COMPENSATE_ABOVE = 64


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def ordered_sum(x) -> np.ndarray | float:
    """Sum along the last axis in ascending index order.

    Rows longer than 64 entries use Neumaier compensated summation.  The
    loop order never changes, so results are bitwise reproducible.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    total = np.zeros(x.shape[:-1])
    if n <= _COMPENSATE_ABOVE:
        for k in range(n):
            total = total + x[..., k]
    else:
        comp = np.zeros(x.shape[:-1])
        for k in range(n):
            xk = x[..., k]
            t = total + xk
            big = np.abs(total) >= np.abs(xk)
            comp = comp + np.where(big, (total - t) + xk, (xk - t) + total)
            total = t
        total = total + comp
    if total.ndim == 0:
        return float(total)
    return total


# ---------------------------------------------------------------------------
# Spectrum


@dataclass(frozen=True)
class Spectrum:
    """Eigenfrequencies ``lambda_k`` of ``A**(1/2)`` (positive, nondecreasing)."""

    lambdas: np.ndarray

    def __post_init__(self):
        lam = np.array(self.lambdas, dtype=float).ravel()
        if lam.size == 0:
            raise InvalidArgument("spectrum must contain at least one frequency")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise InvalidArgument("frequencies must be finite and positive")
        if np.any(np.diff(lam) < 0):
            raise InvalidArgument("frequencies must be nondecreasing")
        lam.setflags(write=False)
        object.__setattr__(self, "lambdas", lam)

    def __len__(self):
        return self.lambdas.size

    @property
    def simple(self) -> bool:
        return bool(np.all(np.diff(self.lambdas) > 0))

    @property
    def min_gap(self) -> float:
        if self.lambdas.size < 2:
            return math.inf
        return float(np.min(np.diff(self.lambdas)))

    def to_dict(self) -> dict:
        return {"lambdas": [float(x) for x in self.lambdas]}


def make_spectrum(kind: str, count: int, **params) -> Spectrum:
    """Build a spectrum of ``count`` frequencies.

    ``kind`` is one of

    * ``dirichlet_string`` (``length``): ``lambda_k = k*pi/length``, the
      string on ``(0, length)`` with Dirichlet ends;
    * ``arithmetic`` (``base``, ``gap``): ``base + (k-1)*gap``;
    * ``clustered`` (``base``, ``gap``, ``cluster_eps``): pairs
      ``(base + m*gap, base + m*gap + cluster_eps/(m+1))`` whose internal
      spacing shrinks, so no uniform gap holds in the limit;
    * ``explicit`` (``values``): the given nondecreasing list.
    """
    if not isinstance(count, (int, np.integer)) or count < 1:
        raise InvalidArgument(f"count must be a positive integer, got {count!r}")

    def positive(name):
        if name not in params:
            raise InvalidArgument(f"{kind} spectrum needs parameter {name!r}")
        value = float(params[name])
        if not value > 0 or not math.isfinite(value):
            raise InvalidArgument(f"{name} must be positive, got {params[name]!r}")
        return value

    k = np.arange(1, count + 1, dtype=float)
    if kind == "dirichlet_string":
        length = positive("length")
        lam = k * math.pi / length
    elif kind == "arithmetic":
        lam = positive("base") + (k - 1) * positive("gap")
    elif kind == "clustered":
        base, gap, eps = positive("base"), positive("gap"), positive("cluster_eps")
        m = np.arange(count) // 2
        lam = base + m * gap + (np.arange(count) % 2) * eps / (m + 1)
    elif kind == "explicit":
        values = np.asarray(params.get("values", ()), dtype=float).ravel()
        if values.size != count:
            raise InvalidArgument(f"explicit spectrum has {values.size} values, count={count}")
        if np.any(values <= 0):
            raise InvalidArgument("explicit frequencies must be positive")
        if np.any(np.diff(values) < 0):
            raise InvalidArgument("explicit frequencies must be nondecreasing")
        lam = values
    else:
        raise InvalidArgument(f"unknown spectrum kind {kind!r}")
    return Spectrum(lam)


# ---------------------------------------------------------------------------
# States


@dataclass(frozen=True)
class ModalState:
    """Phase point ``(t, u_k, u'_k)`` of the full modal system."""

    t: float
    u: np.ndarray
    du: np.ndarray

    def __post_init__(self):
        u = _frozen(np.ravel(self.u))
        du = _frozen(np.ravel(self.du))
        if u.shape != du.shape:
            raise InvalidArgument("u and du must have the same length")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(du))):
            raise InvalidArgument("state entries must be finite")
        t = float(self.t)
        if not t >= 0 or not math.isfinite(t):
            raise InvalidArgument("time must be finite and nonnegative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "du", du)

    def __len__(self):
        return self.u.size

    @classmethod
    def zeros(cls, n: int, t: float = 0.0) -> "ModalState":
        return cls(t, np.zeros(n), np.zeros(n))


@dataclass(frozen=True)
class PolarState:
    """Log-time ``s = log(1+t)``, amplitudes ``rho_k`` and phases ``theta_k``."""

    s: float
    rho: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        rho = _frozen(np.ravel(self.rho))
        theta = _frozen(np.ravel(self.theta))
        if rho.shape != theta.shape:
            raise InvalidArgument("rho and theta must have the same length")
        if np.any(rho < 0) or not np.all(np.isfinite(rho)) or not np.all(np.isfinite(theta)):
            raise InvalidArgument("rho must be nonnegative and all entries finite")
        object.__setattr__(self, "s", float(self.s))
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class ModeSet:
    """Sorted set of array positions (the support ``J``)."""

    indices: tuple = ()

    def __post_init__(self):
        idx = tuple(sorted({int(i) for i in self.indices}))
        if any(i < 0 for i in idx):
            raise InvalidArgument("mode indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, k):
        return int(k) in self.indices

    def mask(self, n: int) -> np.ndarray:
        m = np.zeros(n, dtype=bool)
        m[list(self.indices)] = True
        return m


def _check_lengths(state: ModalState, spec: Spectrum):
    if len(state) != len(spec):
        raise InvalidArgument(
            f"state has {len(state)} modes but spectrum has {len(spec)}"
        )


def classical_energy(state: ModalState, spec: Spectrum) -> tuple[float, np.ndarray]:
    """Return ``(E, e)`` with ``e_k = u'_k**2 + lambda_k**2 u_k**2`` and ``E = sum(e)``."""
    _check_lengths(state, spec)
    modal = state.du**2 + (spec.lambdas * state.u) ** 2
    return ordered_sum(modal), modal


def polar_arrays(t, u, du, lambdas) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised polar transform; ``t`` broadcasts against the leading axes.

    ``v = sqrt(1+t) u``, ``v' = u / (2 sqrt(1+t)) + sqrt(1+t) u'``,
    ``rho = hypot(lambda v, v')``, ``theta = atan2(v', lambda v)``.
    """
    t = np.asarray(t, dtype=float)
    root = np.sqrt(1.0 + t)
    if root.ndim == 1 and np.ndim(u) == 2:
        root = root[:, None]
    v = root * u
    dv = u / (2.0 * root) + root * du
    x = lambdas * v
    rho = np.hypot(x, dv)
    theta = np.where(rho > 0, np.arctan2(dv, x), 0.0)
    return rho, theta


def to_polar(state: ModalState, spec: Spectrum) -> PolarState:
    _check_lengths(state, spec)
    rho, theta = polar_arrays(state.t, state.u, state.du, spec.lambdas)
    return PolarState(math.log1p(state.t), rho, theta)


def from_polar(polar: PolarState, spec: Spectrum) -> ModalState:
    """Inverse of :func:`to_polar`."""
    if polar.rho.size != len(spec):
        raise InvalidArgument("polar state and spectrum lengths differ")
    t = math.expm1(polar.s)
    root = math.sqrt(1.0 + t)
    v = polar.rho * np.cos(polar.theta) / spec.lambdas
    dv = polar.rho * np.sin(polar.theta)
    u = v / root
    du = (dv - u / (2.0 * root)) / root
    return ModalState(t, u, du)


def support(u0: Sequence[float], u1: Sequence[float]) -> ModeSet:
    """Positions where ``u0_k**2 + u1_k**2 != 0`` (exact zero test, no tolerance)."""
    u0 = np.asarray(u0, dtype=float).ravel()
    u1 = np.asarray(u1, dtype=float).ravel()
    if u0.shape != u1.shape:
        raise InvalidArgument("u0 and u1 must have the same length")
    # squaring would flush 1e-300 to zero; test the entries themselves
    nz = (u0 != 0.0) | (u1 != 0.0)
    return ModeSet(tuple(np.flatnonzero(nz)))


# ---------------------------------------------------------------------------
# Trajectory


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered samples of a modal or averaged run.

    ``kind == "modal"``: ``times`` are original times ``t`` and ``u``/``du``
    have shape ``(n_samples, n_modes)``.

    ``kind == "averaged"``: ``times`` are flow times ``s`` and ``rho`` has
    shape ``(n_samples, n_modes)``.  The equivalent original time is
    ``t = exp(s) - 1``.

    Diagnostics are derived lazily from the stored samples.
    """

    kind: str
    times: np.ndarray
    u: np.ndarray | None = None
    du: np.ndarray | None = None
    rho: np.ndarray | None = None
    spectrum: Spectrum | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = _frozen(np.ravel(self.times))
        if times.size and np.any(np.diff(times) <= 0):
            raise InvalidArgument("sample times must be strictly increasing")
        object.__setattr__(self, "times", times)
        if self.kind == "modal":
            if self.spectrum is None:
                raise InvalidArgument("modal trajectories need a spectrum")
            shape = (times.size, len(self.spectrum))
            for name in ("u", "du"):
                arr = _frozen(getattr(self, name)).reshape(shape)
                object.__setattr__(self, name, arr)
        elif self.kind == "averaged":
            arr = np.asarray(self.rho, dtype=float)
            arr = _frozen(arr.reshape(times.size, -1))
            object.__setattr__(self, "rho", arr)
        else:
            raise InvalidArgument(f"unknown trajectory kind {self.kind!r}")

    def __len__(self):
        return self.times.size

    @property
    def n_modes(self) -> int:
        return (self.u if self.kind == "modal" else self.rho).shape[1]

    @cached_property
    def t(self) -> np.ndarray:
        return self.times if self.kind == "modal" else np.expm1(self.times)

    @cached_property
    def s(self) -> np.ndarray:
        return np.log1p(self.times) if self.kind == "modal" else self.times

    @cached_property
    def modal_energy(self) -> np.ndarray:
        """``e_k(t)``; for averaged runs ``rho_k**2 / (1+t)``."""
        if self.kind == "modal":
            return self.du**2 + (self.spectrum.lambdas * self.u) ** 2
        return self.rho**2 * np.exp(-self.times)[:, None]

    @cached_property
    def energy(self) -> np.ndarray:
        """Classical energy ``E(t)``."""
        if self.kind == "modal":
            return ordered_sum(self.modal_energy)
        return self.rescaled_energy * np.exp(-self.times)

    @cached_property
    def rescaled_energy(self) -> np.ndarray:
        """``(1+t) E(t)`` for modal runs, ``R(s) = sum rho_k**2`` for averaged runs."""
        if self.kind == "modal":
            return (1.0 + self.times) * self.energy
        return ordered_sum(self.rho**2)

    @cached_property
    def rescaled_modal_energy(self) -> np.ndarray:
        if self.kind == "modal":
            return (1.0 + self.times)[:, None] * self.modal_energy
        return self.rho**2

    @cached_property
    def polar(self) -> tuple[np.ndarray, np.ndarray]:
        """``(rho, theta)`` arrays; averaged runs carry no phase (theta is zero)."""
        if self.kind == "modal":
            return polar_arrays(self.times, self.u, self.du, self.spectrum.lambdas)
        return self.rho, np.zeros_like(self.rho)

    @cached_property
    def support(self) -> ModeSet:
        if len(self) == 0:
            return ModeSet(())
        if self.kind == "modal":
            return support(self.u[0], self.du[0])
        return ModeSet(tuple(np.flatnonzero(self.rho[0] != 0.0)))

    def state(self, i: int) -> ModalState:
        if self.kind != "modal":
            raise InvalidArgument("averaged trajectories hold no modal states")
        return ModalState(self.times[i], self.u[i], self.du[i])

    def polar_state(self, i: int) -> PolarState:
        rho, theta = self.polar
        return PolarState(self.s[i], rho[i], theta[i])

    def window(self, t_min: float = -math.inf, t_max: float = math.inf) -> np.ndarray:
        """Boolean mask of samples with original time in ``[t_min, t_max]``."""
        return (self.t >= t_min) & (self.t <= t_max)

    def with_meta(self, **extra) -> "Trajectory":
        meta = dict(self.meta)
        meta.update(extra)
        return Trajectory(self.kind, self.times, self.u, self.du, self.rho, self.spectrum, meta)


def modal_trajectory(times, u, du, spectrum: Spectrum, **meta) -> Trajectory:
    return Trajectory("modal", times, u=u, du=du, spectrum=spectrum, meta=meta)


def averaged_trajectory(s, rho, **meta) -> Trajectory:
    return Trajectory("averaged", s, rho=rho, meta=meta)


def stack_states(states: Iterable[ModalState]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    states = list(states)
    t = np.array([st.t for st in states])
    u = np.array([st.u for st in states])
    du = np.array([st.du for st in states])
    return t, u, du
