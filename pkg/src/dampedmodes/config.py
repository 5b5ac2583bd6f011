"""Scenario configuration: INI files with a ``schema_version`` key.

Mode numbers in config files are 1-based (they match the ``e_<k>`` column
labels); they are converted to 0-based array positions on load.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .full import IntegratorConfig, Sampler
from .spectral import ModalState, Spectrum, make_spectrum

SCHEMA_VERSION = 1
FAMILIES = ("finite_modes", "powerlaw_tail", "proportional_pair", "equal_mass", "trivial")
MODES = ("full", "averaged", "verify")


def _floats(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(x) for x in text.replace(",", " ").split())


def _ints(text: str) -> tuple:
    return tuple(int(round(x)) for x in _floats(text))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class SpectrumConfig:
    kind: str = "explicit"
    count: int = 1
    length: float = math.pi
    base: float = 1.0
    gap: float = 1.0
    cluster_eps: float = 0.1
    values: tuple = (1.0,)

    def build(self) -> Spectrum:
        params = {
            "dirichlet_string": {"length": self.length},
            "arithmetic": {"base": self.base, "gap": self.gap},
            "clustered": {"base": self.base, "gap": self.gap, "cluster_eps": self.cluster_eps},
            "explicit": {"values": self.values},
        }
        if self.kind not in params:
            raise InvalidArgument(f"unknown spectrum kind {self.kind!r}")
        return make_spectrum(self.kind, self.count, **params[self.kind])


@dataclass(frozen=True)
class InitialConfig:
    """Initial-data family.

    ``finite_modes``: ``modes`` (1-based) get modal energy ``amplitudes[i]**2``
    split as ``u = amplitude cos(phase)/lambda``, ``u' = amplitude sin(phase)``.
    ``powerlaw_tail``: every mode ``k = 1..N`` gets amplitude ``c (k+1)**-p``.
    ``proportional_pair``: the second mode carries ``c`` times the data of the first.
    ``equal_mass``: every mode gets amplitude ``amplitude``.
    ``trivial``: zero data.
    For averaged runs the amplitude is the initial ``rho_k``.
    """

    family: str = "finite_modes"
    modes: tuple = (1,)
    amplitudes: tuple = (1.0,)
    phases: tuple = ()
    c: float = 1.0
    p: float = 0.6
    amplitude: float = 1.0

    def amplitude_vector(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(amplitude, phase)`` per mode."""
        amp = np.zeros(n)
        ph = np.zeros(n)
        if self.family == "finite_modes":
            if len(self.modes) != len(self.amplitudes):
                raise InvalidArgument("one amplitude per listed mode")
            phases = self.phases or (0.0,) * len(self.modes)
            if len(phases) != len(self.modes):
                raise InvalidArgument("one phase per listed mode")
            for k, a, f in zip(self.modes, self.amplitudes, phases):
                if not 1 <= k <= n:
                    raise InvalidArgument(f"mode {k} outside 1..{n}")
                amp[k - 1], ph[k - 1] = a, f
        elif self.family == "powerlaw_tail":
            if not (self.c > 0 and self.p > 0):
                raise InvalidArgument("powerlaw_tail needs c > 0 and p > 0")
            amp = self.c * (np.arange(1, n + 1) + 1.0) ** -self.p
        elif self.family == "proportional_pair":
            if n != 2:
                raise InvalidArgument("proportional_pair needs exactly two modes")
            base = self.amplitudes[0] if self.amplitudes else 1.0
            f = self.phases[0] if self.phases else 0.0
            amp[:] = (base, self.c * base)
            ph[:] = f
        elif self.family == "equal_mass":
            amp[:] = self.amplitude
        elif self.family == "trivial":
            pass
        else:
            raise InvalidArgument(f"unknown initial-data family {self.family!r}")
        return amp, ph

    def modal_state(self, spec: Spectrum) -> ModalState:
        amp, ph = self.amplitude_vector(len(spec))
        u = amp * np.cos(ph) / spec.lambdas
        du = amp * np.sin(ph)
        if self.family == "proportional_pair":
            # identical frequencies are required for exact proportionality
            u[1], du[1] = self.c * u[0], self.c * du[0]
        # exact zeros stay exact zeros
        u[amp == 0] = 0.0
        du[amp == 0] = 0.0
        return ModalState(0.0, u, du)


@dataclass(frozen=True)
class IntegratorSection:
    scheme: str = "adaptive_rk"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_step: float = math.inf
    t_end: float = 1000.0
    sampler: str = "log_spaced"
    count: int = 1000
    level: int = 4
    max_steps: int = 500_000_000

    def build(self) -> IntegratorConfig:
        sampler = Sampler(self.sampler, count=self.count, level=self.level)
        return IntegratorConfig(self.rel_tol, self.abs_tol, self.max_step, self.t_end, sampler,
                                self.scheme, self.max_steps)


@dataclass(frozen=True)
class AveragedSection:
    s_end: float = 60.0
    tol: float = 1e-8
    count: int = 6001


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    mode: str = "full"
    description: str = ""
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    integrator: IntegratorSection = field(default_factory=IntegratorSection)
    averaged: AveragedSection = field(default_factory=AveragedSection)
    diagnostics: tuple = ("energy",)
    criteria: tuple = ()          # (name, values-tuple) pairs, in file order
    write_polar: bool = False
    output_dir: str = ""
    seed: int = 0
    sweep: tuple = ()             # (section.key, values-tuple)

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgument(f"mode must be one of {MODES}")
        if self.initial.family not in FAMILIES:
            raise InvalidArgument(f"unknown initial-data family {self.initial.family!r}")

    @property
    def criteria_dict(self) -> dict:
        return dict(self.criteria)

    # -- serialisation -------------------------------------------------

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp["scenario"] = {
            "schema_version": str(SCHEMA_VERSION),
            "id": self.scenario_id,
            "mode": self.mode,
            "description": self.description,
            "seed": str(self.seed),
            "output_dir": self.output_dir,
            "diagnostics": ", ".join(self.diagnostics),
            "write_polar": _fmt(self.write_polar),
        }
        for name, section in (("spectrum", self.spectrum), ("initial", self.initial),
                              ("integrator", self.integrator), ("averaged", self.averaged)):
            cp[name] = {f.name: _fmt(getattr(section, f.name)) for f in fields(section)}
        cp["criteria"] = {k: _fmt(v) for k, v in self.criteria}
        if self.sweep:
            cp["sweep"] = {"parameter": self.sweep[0], "values": _fmt(self.sweep[1])}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ScenarioConfig":
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        cp.read_string(text)
        if "scenario" not in cp:
            raise InvalidArgument("config lacks a [scenario] section")
        sc = cp["scenario"]
        version = int(sc.get("schema_version", "0"))
        if version != SCHEMA_VERSION:
            raise InvalidArgument(f"unsupported schema_version {version}")

        def section(name, kind):
            if name not in cp:
                return kind()
            raw = cp[name]
            known = {f.name: f for f in fields(kind)}
            extra = set(raw) - set(known)
            if extra:
                raise InvalidArgument(f"unknown keys in [{name}]: {sorted(extra)}")
            default = kind()
            kwargs = {}
            for key, value in raw.items():
                kwargs[key] = _coerce(getattr(default, key), value, key)
            return kind(**kwargs)

        criteria = tuple((k, _floats(v)) for k, v in cp["criteria"].items()) if "criteria" in cp else ()
        sweep = ()
        if "sweep" in cp:
            sweep = (cp["sweep"]["parameter"].strip(), _floats(cp["sweep"]["values"]))
        diags = tuple(x.strip() for x in sc.get("diagnostics", "energy").split(",") if x.strip())
        return cls(
            scenario_id=sc.get("id", "unnamed"),
            mode=sc.get("mode", "full"),
            description=sc.get("description", ""),
            spectrum=section("spectrum", SpectrumConfig),
            initial=section("initial", InitialConfig),
            integrator=section("integrator", IntegratorSection),
            averaged=section("averaged", AveragedSection),
            diagnostics=diags,
            criteria=criteria,
            write_polar=sc.get("write_polar", "false").strip().lower() == "true",
            output_dir=sc.get("output_dir", ""),
            seed=int(sc.get("seed", "0")),
            sweep=sweep,
        )

    def with_value(self, dotted: str, value) -> "ScenarioConfig":
        """Copy with ``section.key`` replaced (used by parameter sweeps)."""
        sec, _, key = dotted.partition(".")
        if sec not in ("spectrum", "initial", "integrator", "averaged"):
            raise InvalidArgument(f"cannot sweep over section {sec!r}")
        part = getattr(self, sec)
        if key not in {f.name for f in fields(part)}:
            raise InvalidArgument(f"unknown key {dotted!r}")
        current = getattr(part, key)
        value = _coerce(current, _fmt(value), key)
        return replace(self, **{sec: replace(part, **{key: value})})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["criteria"] = [[k, list(v)] for k, v in self.criteria]
        return d


def _coerce(default, text: str, key: str):
    text = text.strip()
    try:
        if isinstance(default, bool):
            return text.lower() == "true"
        if isinstance(default, int):
            return int(float(text))
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            if key == "modes":
                return _ints(text)
            return _floats(text)
    except ValueError as exc:
        raise InvalidArgument(f"bad value for {key}: {text!r}") from exc
    return text


def bundled_names() -> list[str]:
    root = resources.files("dampedmodes") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def load_config(ref: str) -> ScenarioConfig:
    """Load ``builtin:<name>`` from the bundled library or a path on disk."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        res = resources.files("dampedmodes") / "scenarios" / f"{name}.ini"
        if not res.is_file():
            raise InvalidArgument(f"no bundled scenario {name!r}; have {bundled_names()}")
        return ScenarioConfig.from_ini(res.read_text(encoding="utf-8"))
    return ScenarioConfig.from_ini(Path(ref).read_text(encoding="utf-8"))
