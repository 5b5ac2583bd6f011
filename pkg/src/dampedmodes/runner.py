"""Scenario execution: solve, post-process, evaluate criteria, persist."""

from __future__ import annotations

import math
import os
import platform
import time
import traceback
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as dio
from .averaged import (AveragedState, functional_F, grad_F, integrate_averaged, lyapunov_violations,
                       rhs_averaged, verify_averaged_identities)
from .config import ScenarioConfig
from .diagnostics import (equipartition_index, phase_drift, profile_error, profile_from_drift,
                          quotient_series, reference_index, trailing_band,
                          window_average)
from .errors import DegenerateInput, IntegrationFailure, InvalidArgument, NeedsDenserSampling
from .full import (Sampler, energy_increase_violations, fit_decay, integrate_full,
                   verify_energy_identity, verify_polar_reduction)
from .oscillatory import (OscillatoryForcing, ScalarHarnessSpec, bernoulli_harness, osc_bound_sweep,
                          prop_R_harness, time_average)
from .spectral import Trajectory, make_spectrum

EXIT_PASS, EXIT_CRITERIA, EXIT_ERROR = 0, 1, 2


@dataclass
class RunManifest:
    scenario_id: str
    config: dict
    code_version: str
    started: str
    finished: str
    wall_seconds: float
    status: str                       # "ok" or "failed"
    criteria: dict                    # name -> {"pass": bool, "value": ..., "target": [...]}
    files: dict = field(default_factory=dict)   # name -> sha256
    failure: dict | None = None
    out_dir: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "ok" and all(c["pass"] for c in self.criteria.values())

    @property
    def exit_code(self) -> int:
        if self.status != "ok":
            return EXIT_ERROR
        return EXIT_PASS if self.passed else EXIT_CRITERIA

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "config": self.config,
            "code_version": self.code_version,
            "python": platform.python_version(),
            "started": self.started,
            "finished": self.finished,
            "wall_seconds": self.wall_seconds,
            "status": self.status,
            "passed": self.passed,
            "criteria": self.criteria,
            "files": self.files,
            "failure": self.failure,
        }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def ensure_writable(out_dir: Path) -> None:
    """Create ``out_dir`` and prove it is writable; raises ``OSError`` otherwise."""
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write-probe"
    with open(probe, "w", encoding="utf-8") as fh:
        fh.write("ok")
    probe.unlink()


# ---------------------------------------------------------------------------
# Summaries


def _labels(indices) -> list[int]:
    return [int(k) + 1 for k in indices]


def _safe(fn, *args):
    try:
        return fn(*args)
    except (DegenerateInput, InvalidArgument, NeedsDenserSampling) as exc:
        return {"unavailable": str(exc)}


def summarize_full(traj: Trajectory, cfg: ScenarioConfig) -> dict:
    J = traj.support
    R = traj.rescaled_energy
    out: dict = {
        "kind": "modal",
        "samples": len(traj),
        "t_end": float(traj.t[-1]),
        "support": _labels(J.indices),
        "rescaled_energy_band": trailing_band(traj.t, R).as_list(),
        "rescaled_energy_final": float(R[-1]),
        "energy_identity_residual": verify_energy_identity(traj),
        "energy_increase_violations": int(energy_increase_violations(traj).size),
        "all_zero": bool(not np.any(traj.u) and not np.any(traj.du)),
        "solver": {k: traj.meta[k] for k in ("scheme", "steps_accepted", "steps_rejected", "status")},
    }
    fit = _safe(fit_decay, traj)
    out["decay"] = fit if isinstance(fit, dict) else dict(zip(("M1", "M2", "slope"), fit))

    scaled = traj.rescaled_modal_energy
    out["modal_rescaled_initial_max"] = float(np.max(scaled[0]))
    trailing = traj.t >= (1.0 + traj.t[-1]) / 10.0 - 1.0
    out["modal_rescaled_trailing_max"] = float(np.max(scaled[trailing]))
    if len(J) > 0:
        # one period of the slowest active mode quenches the 2*lambda oscillation
        width = 2.0 * math.pi / float(np.min(traj.spectrum.lambdas[list(J.indices)]))
        averaged_end = window_average(traj.t, scaled[:, list(J.indices)], width)[-1]
        out["modal_rescaled_final_max"] = float(np.max(averaged_end))

    if len(J) >= 2:
        _, idx = equipartition_index(traj, J)
        out["equipartition_band"] = trailing_band(traj.t, idx).as_list()
        h = reference_index(traj, 0.0)
        qs = np.column_stack([quotient_series(traj, h, k)[1] for k in J.indices if k != h])
        out["quotient_reference"] = h + 1
        out["quotient_band"] = [float(np.min(qs[trailing])), float(np.max(qs[trailing]))]
        # proportional data: deviation of each component from the initial ratio
        k0 = J.indices[0]
        devs = []
        for k in J.indices[1:]:
            u0, d0 = traj.u[0, k0], traj.du[0, k0]
            ref = u0 if u0 != 0 else d0
            c = (traj.u[0, k] if u0 != 0 else traj.du[0, k]) / ref
            scale = max(np.max(np.abs(traj.u[:, k0])), np.max(np.abs(traj.du[:, k0])))
            dev = max(np.max(np.abs(traj.u[:, k] - c * traj.u[:, k0])),
                      np.max(np.abs(traj.du[:, k] - c * traj.du[:, k0])))
            devs.append(dev / scale)
        out["ratio_deviation"] = float(max(devs))

    if "phase" in cfg.diagnostics and len(J) > 0:
        try:
            variations = [phase_drift(traj, k).final_variation for k in J.indices]
            out["phase_drift_variation"] = float(max(variations))
            profile = profile_from_drift(traj)
            t, err = profile_error(traj, profile)
            lo = (1.0 + t[-1]) / 2.0 - 1.0
            out["profile_phases"] = profile.phases.tolist()
            out["profile_error_trailing"] = float(np.max(err[t >= lo]))
        except NeedsDenserSampling as exc:
            out["phase_drift_variation"] = {"unavailable": str(exc)}
    return out


def summarize_averaged(traj: Trajectory, cfg: ScenarioConfig) -> dict:
    rho_end = traj.rho[-1]
    J = traj.support
    active = list(J.indices)
    R = traj.rescaled_energy
    out: dict = {
        "kind": "averaged",
        "samples": len(traj),
        "s_end": float(traj.s[-1]),
        "support": _labels(active),
        "rescaled_energy_final": float(R[-1]),
        "rescaled_energy_band": trailing_band(traj.t, R).as_list(),
        "rho_final_min": float(np.min(rho_end[active])) if active else 0.0,
        "rho_final_max": float(np.max(rho_end[active])) if active else 0.0,
        "lyapunov_violations": int(lyapunov_violations(traj, 1e-12).size),
        "all_zero": bool(not np.any(traj.rho)),
        "stopped_at": traj.meta.get("stopped_at"),
        "solver": {k: traj.meta[k] for k in ("steps_accepted", "steps_rejected", "status")},
    }
    if len(traj) >= 3:
        rep = verify_averaged_identities(traj)
        out["identities"] = {"r_residual": rep.r_residual, "q_residual": rep.q_residual,
                             "window_ok": rep.window_ok, "notices": rep.notices}
    return out


# ---------------------------------------------------------------------------
# Toolkit checks (verify mode)


def _check_gradient(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    worst, exact = 0.0, True
    h = 1e-5
    for _ in range(100):
        rho = rng.uniform(0.0, 2.0, 8)
        g = grad_F(rho)
        exact &= bool(np.array_equal(-g, rhs_averaged(rho)))
        fd = np.empty(8)
        for k in range(8):
            e = np.zeros(8)
            e[k] = h
            fd[k] = (functional_F(rho + e) - functional_F(rho - e)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - g)) / np.max(np.abs(g))))
    return {"exact_negation": exact, "fd_rel_error": worst}


def _check_averages() -> dict:
    T = 50.0
    return {
        "T": T,
        "sin2": time_average("sin2", T, 1.0),
        "sin4": time_average("sin4", T, 1.0),
        "sin2sin2": time_average("sin2sin2", T, 1.0, 2.0),
        "sin2sin2_equal": time_average("sin2sin2", T, 1.0, 1.0),
    }


def _check_prop_r() -> dict:
    spec = ScalarHarnessSpec(z0=1.0, z_inf=2.0, psi1=OscillatoryForcing(((1.0, 1.0, 0.0),)),
                             psi2=lambda t: math.exp(-t))
    res = prop_R_harness(spec, 40.0)
    return {"finals": {k: float(v) for k, v in res.finals.items()}, "worst": float(res.final),
            "z_inf": 2.0, "flags": res.flags}


def _check_bernoulli() -> dict:
    one = lambda t: 1.0
    plain = bernoulli_harness(ScalarHarnessSpec(z0=3.0, alpha=one), 30.0)
    spec = ScalarHarnessSpec(z0=1.0, alpha=one, beta=OscillatoryForcing(((1.0, 1.0, 0.0),)),
                             L0=0.0, L1=1.0, L2=1.0, z_at_t0=1.0)
    thr = bernoulli_harness(spec, 30.0)
    return {"final": plain.final, "t0": thr.t0_threshold, "sup_after_t0": thr.sup_after_t0,
            "flags": plain.flags + thr.flags}


def _check_reduction(t_end: float = 100.0, levels=(3, 4, 5)) -> dict:
    from .full import IntegratorConfig
    from .spectral import ModalState

    spec = make_spectrum("explicit", 1, values=(1.0,))
    init = ModalState(0.0, [1.0], [0.0])
    rho_sup, theta_sup, slope = [], [], None
    for level in levels:
        cfg = IntegratorConfig(1e-12, 1e-15, math.inf, t_end, Sampler.dyadic(level), "adaptive_rk")
        rep = verify_polar_reduction(integrate_full(init, spec, cfg))
        rho_sup.append(rep.rho_sup)
        theta_sup.append(rep.theta_sup)
        slope = rep.g_envelope_slope
        M = {"M5": rep.M5, "M7": rep.M7, "M3": rep.M3, "M4": rep.M4}
    ratios = [a / b for a, b in zip(rho_sup[:-1], rho_sup[1:])]
    ratios += [a / b for a, b in zip(theta_sup[:-1], theta_sup[1:])]
    return {"levels": list(levels), "rho_sup": rho_sup, "theta_sup": theta_sup,
            "min_ratio": float(min(ratios)), "g_envelope_slope": slope, **M}


def summarize_verify(cfg: ScenarioConfig, seed: int) -> dict:
    out: dict = {"kind": "verify", "seed": seed}
    checks = cfg.diagnostics
    if "gradient" in checks:
        out["gradient"] = _check_gradient(seed)
    if "osc_bound" in checks:
        sw = osc_bound_sweep(seed)
        out["osc_bound"] = {"cases": sw.cases, "violations": sw.violations, "max_ratio": sw.max_ratio}
    if "averages" in checks:
        out["averages"] = _check_averages()
    if "prop_r" in checks:
        out["prop_r"] = _check_prop_r()
    if "bernoulli" in checks:
        out["bernoulli"] = _check_bernoulli()
    if "reduction" in checks:
        out["reduction"] = _check_reduction()
    unknown = set(checks) - {"gradient", "osc_bound", "averages", "prop_r", "bernoulli", "reduction"}
    if unknown:
        raise InvalidArgument(f"unknown verify checks {sorted(unknown)}")
    return out


# ---------------------------------------------------------------------------
# Criteria


def _get(summary: dict, *path):
    cur = summary
    for p in path:
        if not isinstance(cur, dict) or p not in cur:
            return None
        cur = cur[p]
    return None if isinstance(cur, dict) and "unavailable" in cur else cur


def _num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _band_in(band, lo, hi) -> bool:
    return band is not None and lo <= band[0] and band[1] <= hi


def evaluate_criterion(name: str, target: tuple, s: dict) -> dict:
    """One named check against the summary; unknown names raise ``InvalidArgument``."""
    v = None
    ok = False
    if name == "rescaled_band":
        v = s.get("rescaled_energy_band")
        ok = _band_in(v, *target)
    elif name == "final_rescaled":
        v = s.get("rescaled_energy_final")
        ok = _num(v) and abs(v - target[0]) < target[1]
    elif name == "final_rescaled_band":
        v = s.get("rescaled_energy_final")
        ok = _num(v) and target[0] <= v <= target[1]
    elif name == "truncation_law":
        v = s.get("rescaled_energy_final")
        j = len(s.get("support", ()))
        ok = _num(v) and j > 0 and abs(v - 4.0 * j / (2 * j + 1)) < target[0]
    elif name == "final_amplitude":
        v = [s.get("rho_final_min"), s.get("rho_final_max")]
        ok = all(_num(x) and abs(x - target[0]) < target[1] for x in v)
    elif name == "max_final_amplitude":
        v = s.get("rho_final_max")
        ok = _num(v) and v < target[0]
    elif name == "trivial":
        v = s.get("all_zero")
        ok = v is True
    elif name == "lyapunov_violations_max":
        v = s.get("lyapunov_violations")
        ok = v is not None and v <= target[0]
    elif name == "identities_residual_max":
        v = [_get(s, "identities", "r_residual"), _get(s, "identities", "q_residual")]
        ok = all(x is None or x < target[0] for x in v) and v[0] is not None
    elif name == "energy_identity_max":
        v = s.get("energy_identity_residual")
        ok = _num(v) and v < target[0]
    elif name == "energy_monotone":
        v = s.get("energy_increase_violations")
        ok = v == 0
    elif name == "decay_slope":
        v = _get(s, "decay", "slope")
        ok = _num(v) and target[0] <= v <= target[1]
    elif name == "m1_min":
        v = _get(s, "decay", "M1")
        ok = _num(v) and v > target[0]
    elif name == "equipartition_max":
        v = s.get("equipartition_band")
        ok = v is not None and v[1] <= target[0]
    elif name == "equipartition_min":
        v = s.get("equipartition_band")
        ok = v is not None and v[0] >= target[0]
    elif name == "quotient_band":
        v = s.get("quotient_band")
        ok = _band_in(v, *target)
    elif name == "ratio_constant_tol":
        v = s.get("ratio_deviation")
        ok = _num(v) and v <= target[0]
    elif name == "drift_variation_max":
        v = s.get("phase_drift_variation")
        ok = _num(v) and v < target[0]
    elif name == "profile_error_max":
        v = s.get("profile_error_trailing")
        ok = _num(v) and v < target[0]
    elif name == "modal_fraction_max":
        peak, start = s.get("modal_rescaled_final_max"), s.get("modal_rescaled_initial_max")
        v = peak / start if _num(peak) and _num(start) and start > 0 else None
        ok = _num(v) and v < target[0]
    elif name == "modal_final_max":
        v = s.get("modal_rescaled_final_max")
        ok = _num(v) and v < target[0]
    elif name == "gradient_rel_max":
        g = s.get("gradient") or {}
        v = g.get("fd_rel_error")
        ok = bool(g.get("exact_negation")) and _num(v) and v < target[0]
    elif name == "osc_bound_violations_max":
        v = _get(s, "osc_bound", "violations")
        ok = v is not None and v <= target[0]
    elif name == "average_tol":
        a = s.get("averages") or {}
        v = [a.get("sin2"), a.get("sin4"), a.get("sin2sin2"), a.get("sin2sin2_equal")]
        tol = target[0]
        ok = (all(_num(x) for x in v) and abs(v[0] - 0.5) < tol and abs(v[1] - 0.375) < tol
              and abs(v[2] - 0.25) < tol and abs(v[3] - 0.375) < tol
              and abs(v[3] - 0.375) < abs(v[3] - 0.25))
    elif name == "prop_r_tol":
        p = s.get("prop_r") or {}
        v = p.get("finals")
        ok = bool(v) and all(_num(x) and abs(x - p["z_inf"]) < target[0] for x in v.values())
    elif name == "bernoulli_tol":
        v = _get(s, "bernoulli", "final")
        ok = _num(v) and abs(v - 1.0) < target[0]
    elif name == "bernoulli_sup_max":
        v = _get(s, "bernoulli", "sup_after_t0")
        ok = _num(v) and v <= target[0]
    elif name == "reduction_ratio_min":
        v = _get(s, "reduction", "min_ratio")
        ok = _num(v) and v >= target[0]
    elif name == "envelope_slope_max":
        v = _get(s, "reduction", "g_envelope_slope")
        ok = _num(v) and v <= target[0]
    else:
        raise InvalidArgument(f"unknown criterion {name!r}")
    return {"pass": bool(ok), "value": v, "target": list(target)}


def evaluate_criteria(cfg: ScenarioConfig, summary: dict) -> dict:
    return {name: evaluate_criterion(name, target, summary) for name, target in cfg.criteria}


# ---------------------------------------------------------------------------
# Solving


def solve(cfg: ScenarioConfig) -> Trajectory:
    spec = cfg.spectrum.build()
    if cfg.mode == "full":
        initial = cfg.initial.modal_state(spec)
        return integrate_full(initial, spec, cfg.integrator.build())
    if cfg.mode == "averaged":
        amp, _ = cfg.initial.amplitude_vector(len(spec))
        a = cfg.averaged
        return integrate_averaged(AveragedState(amp), a.s_end, a.tol, a.count)
    raise InvalidArgument(f"mode {cfg.mode!r} has no trajectory")


def summarize(cfg: ScenarioConfig, traj: Trajectory | None, seed: int) -> dict:
    if cfg.mode == "full":
        body = summarize_full(traj, cfg)
    elif cfg.mode == "averaged":
        body = summarize_averaged(traj, cfg)
    else:
        body = summarize_verify(cfg, seed)
    return {"scenario_id": cfg.scenario_id, "description": cfg.description, **body}


def resolve_out_dir(cfg: ScenarioConfig, out_dir=None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    if cfg.output_dir:
        return Path(cfg.output_dir)
    return Path("runs") / cfg.scenario_id


def run_scenario(cfg: ScenarioConfig, out_dir=None, seed: int | None = None) -> RunManifest:
    """Execute one scenario and write ``series.csv``, ``summary.json``, ``manifest.json``.

    The output directory is checked for writability before any computation
    (an ``OSError`` propagates).  Solver failures still produce a manifest with
    a failure record, plus outputs built from the partial trajectory.
    """
    out = resolve_out_dir(cfg, out_dir)
    ensure_writable(out)
    seed = cfg.seed if seed is None else int(seed)
    started, t_start = _now(), time.perf_counter()
    status, failure, criteria = "ok", None, {}
    written: list[Path] = []
    traj = None
    try:
        if cfg.mode != "verify":
            try:
                traj = solve(cfg)
            except IntegrationFailure as exc:
                status = "failed"
                failure = {"type": type(exc).__name__, "message": str(exc)}
                traj = exc.partial
        if status == "ok":
            summary = summarize(cfg, traj, seed)
            criteria = evaluate_criteria(cfg, summary)
            summary["criteria"] = criteria
        else:
            summary = {"scenario_id": cfg.scenario_id, "failure": failure,
                       "partial_samples": 0 if traj is None else len(traj)}
        if traj is not None and len(traj) == 0:
            traj = None
        written = dio.emit_outputs(traj, out, summary, polar=cfg.write_polar)
    except Exception as exc:  # anything else is an execution error, still recorded
        status = "failed"
        failure = {"type": type(exc).__name__, "message": str(exc),
                   "traceback": traceback.format_exc(limit=5)}

    manifest = RunManifest(
        scenario_id=cfg.scenario_id,
        config=cfg.to_dict(),
        code_version=__version__,
        started=started,
        finished=_now(),
        wall_seconds=round(time.perf_counter() - t_start, 3),
        status=status,
        criteria=criteria,
        files={p.name: dio.sha256(p) for p in written},
        failure=failure,
        out_dir=str(out),
    )
    dio.atomic_write(out / dio.MANIFEST, dio.dumps(manifest.to_dict()))
    return manifest


def load_manifests(root) -> list[dict]:
    """All ``manifest.json`` files below ``root``, sorted by path."""
    import json

    root = Path(root)
    paths = sorted(root.rglob(dio.MANIFEST)) if root.is_dir() else [root]
    out = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            m = json.load(fh)
        m["_path"] = os.fspath(p)
        out.append(m)
    return out


def verify_manifest_checksums(manifest: dict, directory) -> bool:
    d = Path(directory)
    return all((d / name).is_file() and dio.sha256(d / name) == digest
               for name, digest in manifest.get("files", {}).items())
