"""The nine reference scenarios on [1, 10] with n = 4 and their published values."""

from __future__ import annotations

from .kernel import GroupCovariance
from .model import BUILTIN_BASES, build_separate

__all__ = ["PAIRS", "RHOS", "REFERENCE", "scenario_config", "scenario", "all_scenarios"]

PAIRS = (("f_A", "f_B"), ("f_A", "f_C"), ("f_B", "f_C"))
RHOS = (0.2, 0.5, 0.7)
INTERVAL = (1.0, 10.0)

# (pair, rho) -> optimal design, optimal Phi_inf, uniform-design Phi_inf
REFERENCE = {
    (("f_A", "f_B"), 0.2): ((1, 1.59, 3.93, 10), 14.79, 141.87),
    (("f_A", "f_B"), 0.5): ((1, 1.62, 3.91, 10), 9.44, 142.59),
    (("f_A", "f_B"), 0.7): ((1, 1.74, 7.99, 10), 6.09, 148.74),
    (("f_A", "f_C"), 0.2): ((1, 3.46, 9.60, 10), 16.00, 33.32),
    (("f_A", "f_C"), 0.5): ((1, 2.86, 8.83, 10), 10.00, 29.10),
    (("f_A", "f_C"), 0.7): ((1, 2.61, 3.52, 10), 6.60, 25.66),
    (("f_B", "f_C"), 0.2): ((1, 2.20, 6.25, 10), 14.71, 147.27),
    (("f_B", "f_C"), 0.5): ((1, 1.62, 3.98, 10), 9.53, 127.19),
    (("f_B", "f_C"), 0.7): ((1, 2.85, 6.29, 10), 5.99, 115.07),
}


def scenario(pair, rho):
    """Model and group covariance for one reference scenario."""
    f1, f2 = (BUILTIN_BASES[name] for name in pair)
    return build_separate(f1, f2, INTERVAL), GroupCovariance(1.0, 1.0, rho)


def all_scenarios():
    for pair in PAIRS:
        for rho in RHOS:
            yield pair, rho


def scenario_config(pair, rho) -> dict:
    """JSON-ready config for a reference scenario, including its published values."""
    design, optimal, uniform = REFERENCE[(tuple(pair), rho)]
    return {
        "name": f"{pair[0]}_{pair[1]}_rho{rho}",
        "interval": list(INTERVAL),
        "bases": {"group1": pair[0], "group2": pair[1]},
        "sigma": {"sigma1": 1.0, "sigma2": 1.0, "rho": rho},
        "kernel": "brownian",
        "n": 4,
        "reference": {"optimal_design": list(design), "optimal_phi": optimal, "uniform_phi": uniform},
    }
