"""Regenerate the bundled scenario INI files."""

import math
from pathlib import Path

from dampedmodes.config import (AveragedSection, InitialConfig, IntegratorSection, ScenarioConfig,
                                SpectrumConfig)

OUT = Path(__file__).resolve().parents[1] / "src" / "dampedmodes" / "scenarios"


def averaged(sid, desc, count, initial, criteria, s_end=60.0, sweep=(), samples=6001):
    return ScenarioConfig(sid, "averaged", desc,
                          SpectrumConfig("arithmetic", count, base=1.0, gap=1.0), initial,
                          averaged=AveragedSection(s_end, 1e-8, samples), diagnostics=("energy",),
                          criteria=criteria, sweep=sweep)


def full(sid, desc, spectrum, initial, integ, criteria, diagnostics=("energy",), polar=False):
    return ScenarioConfig(sid, "full", desc, spectrum, initial, integ, diagnostics=diagnostics,
                          criteria=criteria, write_polar=polar)


single = SpectrumConfig("explicit", 1, values=(1.0,))
one = InitialConfig("finite_modes", modes=(1,), amplitudes=(1.0,))

SCENARIOS = [
    averaged("averaged_single", "averaged flow from rho=(1): limit 2/sqrt(3)", 1, one,
             (("final_amplitude", (2 / math.sqrt(3), 1e-6)), ("final_rescaled", (4 / 3, 1e-6)),
              ("lyapunov_violations_max", (0.0,)))),
    averaged("averaged_pair", "averaged flow from rho=(1,1): limit 2/sqrt(5), R=8/5", 2,
             InitialConfig("finite_modes", modes=(1, 2), amplitudes=(1.0, 1.0)),
             (("final_amplitude", (2 / math.sqrt(5), 1e-6)), ("final_rescaled", (1.6, 1e-6)),
              ("identities_residual_max", (1e-5,)), ("lyapunov_violations_max", (0.0,))),
             samples=15001),
    *[averaged(f"averaged_equal_{n}", f"equal-mass averaged flow, N={n}: R -> 4N/(2N+1)", n,
               InitialConfig("equal_mass", amplitude=1.0),
               (("truncation_law", (1e-6,)), ("lyapunov_violations_max", (0.0,))))
      for n in (10, 100, 200)],
    averaged("averaged_equal_sweep", "equal-mass averaged flow swept over N", 10,
             InitialConfig("equal_mass", amplitude=1.0), (("truncation_law", (1e-6,)),),
             sweep=("spectrum.count", (10.0, 100.0, 200.0))),
    averaged("averaged_powerlaw_200", "averaged flow, N=200, rho_k(0)=(k+1)^-0.6", 200,
             InitialConfig("powerlaw_tail", c=1.0, p=0.6),
             (("max_final_amplitude", (0.15,)), ("final_rescaled_band", (1.9, 2.0)),
              ("final_rescaled", (800 / 401, 0.01 * 800 / 401)))),
    full("full_trivial", "zero data stays zero", SpectrumConfig("arithmetic", 2),
         InitialConfig("trivial"), IntegratorSection(t_end=100.0, count=200),
         (("trivial", ()),)),
    full("full_single_identity", "single mode lambda=1, u0=1, t_end=1e3: energy identity", single,
         one, IntegratorSection(rel_tol=1e-10, t_end=1e3, count=1000),
         (("energy_identity_max", (1e-4,)), ("energy_monotone", ()),
          ("rescaled_band", (1.28, 1.39)))),
    full("full_single_decay", "single mode lambda=1, u0=1, t_end=1e4, rotating frame", single,
         one, IntegratorSection("rotating_frame", rel_tol=1e-10, t_end=1e4, count=4000),
         (("decay_slope", (-1.05, -0.95)), ("m1_min", (0.0,)), ("rescaled_band", (1.28, 1.39)),
          ("drift_variation_max", (0.05,)), ("profile_error_max", (0.05,))),
         diagnostics=("energy", "phase"), polar=True),
    full("full_single_decay_baseline", "single mode lambda=1, u0=1, t_end=1e4, baseline RK",
         single, one, IntegratorSection("adaptive_rk", rel_tol=1e-10, t_end=1e4, count=4000),
         (("decay_slope", (-1.05, -0.95)), ("m1_min", (0.0,)), ("energy_monotone", ()))),
    full("full_two_modes", "lambda=(1,2), amplitudes (0.8,1.0): equipartition by t=1e4",
         SpectrumConfig("explicit", 2, values=(1.0, 2.0)),
         InitialConfig("finite_modes", modes=(1, 2), amplitudes=(0.8, 1.0)),
         IntegratorSection("rotating_frame", rel_tol=1e-9, t_end=1e4, count=4000),
         (("equipartition_max", (1.1,)), ("quotient_band", (0.95, 1.05)),
          ("drift_variation_max", (0.05,)), ("profile_error_max", (0.05,))),
         diagnostics=("energy", "phase")),
    full("full_proportional", "double eigenvalue (1,1), second mode = 0.5 x first",
         SpectrumConfig("explicit", 2, values=(1.0, 1.0)),
         InitialConfig("proportional_pair", amplitudes=(1.0,), c=0.5),
         IntegratorSection(rel_tol=1e-10, t_end=1e3, count=1000),
         (("ratio_constant_tol", (1e-9,)), ("equipartition_min", (1.5,)))),
    full("full_powerlaw_32", "N=32 string modes, (k+1)^-0.6 data, t_end=1e4, rotating frame",
         SpectrumConfig("dirichlet_string", 32, length=math.pi),
         InitialConfig("powerlaw_tail", c=1.0, p=0.6),
         IntegratorSection("rotating_frame", rel_tol=1e-10, t_end=1e4, count=2000),
         (("modal_fraction_max", (0.2,)), ("modal_final_max", (0.2,)),
          ("rescaled_band", (1.7, 2.05)))),
    ScenarioConfig("verify_toolkit", "verify", "oscillatory integrals, averages, harnesses, "
                   "gradient and reduction checks",
                   diagnostics=("gradient", "osc_bound", "averages", "prop_r", "bernoulli",
                                "reduction"),
                   criteria=(("gradient_rel_max", (1e-6,)), ("osc_bound_violations_max", (0.0,)),
                             ("average_tol", (0.02,)), ("prop_r_tol", (5e-3,)),
                             ("bernoulli_tol", (1e-6,)), ("bernoulli_sup_max", (2.0,)),
                             ("reduction_ratio_min", (3.5,)), ("envelope_slope_max", (-1.95,)))),
]

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    for cfg in SCENARIOS:
        assert ScenarioConfig.from_ini(cfg.to_ini()) == cfg, cfg.scenario_id
        (OUT / f"{cfg.scenario_id}.ini").write_text(cfg.to_ini(), encoding="utf-8")
        print(cfg.scenario_id)
