"""Command line interface.

    corrdesign optimize --config scenario.json --out results/
    corrdesign evaluate --config scenario_with_design.json
    corrdesign reproduce-tables --config configs/reference --out results/
    corrdesign bands --config scenario.json --out results/

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .blue import NumericalError, blue_cov, loewner_gap
from .config import ConfigError, ScenarioConfig, config_hash, load_config
from .design import DesignProblem, optimize_design, uniform_design
from .discrete import Design, estimator_cov, optimal_weights
from .model import General, ModelError, difference_contrast
from .reports import metadata, write_csv, write_json
from .simulate import average_bands

log = logging.getLogger("corrdesign")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

UNIFORM_TOL = 0.01
OPTIMAL_FACTOR = 1.05
DESIGN_TOL = 0.15


def _meta(cfg: ScenarioConfig, **extra) -> dict:
    return metadata(cfg.seed, config_hash(cfg.raw), scenario=cfg.name, config=cfg.resolved(), **extra)


def _problem(cfg: ScenarioConfig) -> DesignProblem:
    return DesignProblem(cfg.model, cfg.sigma, cfg.criterion, cfg.kernel)


def _estimation_design(problem: DesignProblem, design: Design) -> Design:
    return Design(problem._to_estimation_time(design.array))


def _design_details(cfg: ScenarioConfig, problem: DesignProblem, design: Design) -> dict:
    model = problem.estimation_model
    est_design = _estimation_design(problem, design)
    weights = optimal_weights(model, cfg.sigma, est_design, problem.info)
    return {
        "points": list(design.points),
        "weights": weights.phis,
        "pseudoinverse": weights.pseudoinverse,
        "estimator_cov": estimator_cov(model, cfg.sigma, est_design, problem.info),
    }


def _gap_diagnostics(cfg: ScenarioConfig, problem: DesignProblem) -> dict:
    if isinstance(cfg.model.structure, General) or problem.kernel is not None:
        return {}
    cov = blue_cov(cfg.model, cfg.sigma, problem.info)
    out = {}
    for group in (1, 2):
        gap = loewner_gap(cfg.model, cfg.sigma, group, cov)
        out[f"group{group}"] = {
            "min_eigenvalue": float(np.linalg.eigvalsh(gap)[0]),
            "frobenius": float(np.linalg.norm(gap)),
        }
    return out


def run_optimize(cfg: ScenarioConfig, out: Path | None = None, fmt: str = "csv") -> dict:
    problem = _problem(cfg)
    result = optimize_design(cfg.model, cfg.sigma, cfg.n, cfg.criterion, cfg.pso, problem=problem)
    uniform = uniform_design(*cfg.interval, cfg.n)
    uniform_value = problem.criterion(uniform)
    report = {
        "scenario": cfg.name,
        "rho": cfg.sigma.rho,
        "criterion": _crit_name(cfg),
        "optimal": dict(_design_details(cfg, problem, result.design), value=result.value),
        "uniform": dict(_design_details(cfg, problem, uniform), value=uniform_value),
        "blue_cov": blue_cov(problem.estimation_model, cfg.sigma, problem.info).cov,
        "loewner_gap": _gap_diagnostics(cfg, problem),
        "restart_values": result.restart_values,
    }
    if out is not None:
        meta = _meta(cfg)
        if fmt == "csv":
            header = ["scenario", "rho"] + [f"t{i + 1}" for i in range(cfg.n)] + ["phi", "uniform_phi"]
            row = [cfg.name, cfg.sigma.rho, *result.design.points, result.value, uniform_value]
            write_csv(out / f"{cfg.name}_design.csv", meta, header, [row])
        write_json(out / f"{cfg.name}_report.json", meta, report)
    return report


def _crit_name(cfg: ScenarioConfig) -> str:
    return "phi_inf" if math.isinf(cfg.criterion.p_norm) else f"phi_{cfg.criterion.p_norm:g}"


def run_evaluate(cfg: ScenarioConfig, out: Path | None = None, fmt: str = "csv") -> dict:
    if cfg.design is None:
        raise ConfigError("design", "evaluate needs a design in the config")
    problem = _problem(cfg)
    design = Design(cfg.design)
    uniform = uniform_design(*cfg.interval, design.n)
    report = {
        "scenario": cfg.name,
        "criterion": _crit_name(cfg),
        "design": dict(_design_details(cfg, problem, design), value=problem.criterion(design)),
        "uniform": dict(_design_details(cfg, problem, uniform), value=problem.criterion(uniform)),
    }
    if out is not None:
        meta = _meta(cfg)
        if fmt == "csv":
            header = ["scenario", "rho"] + [f"t{i + 1}" for i in range(design.n)] + ["phi", "uniform_phi"]
            row = [cfg.name, cfg.sigma.rho, *design.points, report["design"]["value"], report["uniform"]["value"]]
            write_csv(out / f"{cfg.name}_evaluate.csv", meta, header, [row])
        write_json(out / f"{cfg.name}_evaluate.json", meta, report)
    return report


def run_reproduce_tables(config_dir: Path, out: Path | None = None, fmt: str = "csv",
                         seed: int | None = None) -> dict:
    config_dir = Path(config_dir)
    if not config_dir.is_dir():
        raise ConfigError(str(config_dir), "not a directory")
    paths = sorted(config_dir.glob("*.json"))
    if not paths:
        raise ConfigError(str(config_dir), "no scenario configs (*.json) found")
    rows = []
    for path in paths:
        cfg = load_config(path, seed)
        ref = cfg.reference
        for key in ("uniform_phi", "optimal_phi"):
            if key not in ref:
                raise ConfigError(f"{path.name}:reference.{key}", "missing reference value")
        problem = _problem(cfg)
        uniform_value = problem.criterion(uniform_design(*cfg.interval, cfg.n))
        result = optimize_design(cfg.model, cfg.sigma, cfg.n, cfg.criterion, cfg.pso, problem=problem)
        dev_u = uniform_value / ref["uniform_phi"] - 1.0
        dev_o = result.value / ref["optimal_phi"] - 1.0
        rows.append([cfg.name, cfg.sigma.rho, "uniform_phi", ref["uniform_phi"], uniform_value, dev_u,
                     "pass" if abs(dev_u) <= UNIFORM_TOL else "fail"])
        rows.append([cfg.name, cfg.sigma.rho, "optimal_phi", ref["optimal_phi"], result.value, dev_o,
                     "pass" if result.value <= OPTIMAL_FACTOR * ref["optimal_phi"] else "fail"])
        if "optimal_design" in ref and len(ref["optimal_design"]) == cfg.n:
            delta = float(np.max(np.abs(np.array(ref["optimal_design"]) - result.design.array)))
            rows.append([cfg.name, cfg.sigma.rho, "design_max_abs_dev",
                         " ".join(f"{x:g}" for x in ref["optimal_design"]),
                         " ".join(f"{x:.4f}" for x in result.design.points), delta,
                         "info:match" if delta <= DESIGN_TOL else "info:differs"])
        log.info("%s done", cfg.name)
    header = ["scenario", "rho", "quantity", "reference", "computed", "deviation", "status"]
    report = {"header": header, "rows": rows,
              "all_pass": all(r[-1] == "pass" for r in rows if not str(r[-1]).startswith("info"))}
    if out is not None:
        meta = metadata(seed if seed is not None else 20200101, "", scenario_dir=str(config_dir),
                        tolerances={"uniform_rel": UNIFORM_TOL, "optimal_factor": OPTIMAL_FACTOR,
                                    "design_abs": DESIGN_TOL})
        if fmt == "csv":
            write_csv(out / "tables.csv", meta, header, rows)
        else:
            write_json(out / "tables.json", meta, report)
    return report


def run_bands(cfg: ScenarioConfig, out: Path | None = None, fmt: str = "csv", threads: int = 1) -> dict:
    if cfg.kernel.name != "brownian":
        raise ConfigError("kernel", "band simulation supports the Brownian kernel only")
    problem = _problem(cfg)
    if cfg.design is not None:
        optimal = Design(cfg.design)
    else:
        optimal = optimize_design(cfg.model, cfg.sigma, cfg.n, cfg.criterion, cfg.pso, problem=problem).design
    uniform = uniform_design(*cfg.interval, optimal.n)
    grid = np.linspace(*cfg.interval, cfg.bands.grid_size)
    theta = cfg.theta_or_default
    truth = difference_contrast(cfg.model, grid) @ theta
    report = {"scenario": cfg.name, "theta": theta}
    for label, design in (("optimal", optimal), ("uniform", uniform)):
        band = average_bands(cfg.model, cfg.sigma, theta, design, cfg.alpha, grid, cfg.bands.runs, cfg.seed,
                             cfg.bands.mc_draws, threads)
        report[label] = {
            "design": list(design.points),
            "D": band.D,
            "max_width": float(np.max(band.width)),
            "grid": band.grid, "h": band.h, "estimate": band.estimate,
            "lower": band.lower, "upper": band.upper, "true_difference": truth,
        }
        if out is not None:
            meta = _meta(cfg, design=list(design.points), D=band.D, alpha=cfg.alpha, runs=cfg.bands.runs,
                         critical_value="parametric Gaussian simulation from the known estimator covariance")
            if fmt == "csv":
                rows = zip(band.grid, band.h, band.estimate, band.lower, band.upper, truth)
                write_csv(out / f"{cfg.name}_bands_{label}.csv", meta,
                          ["t", "h", "estimate", "lower", "upper", "true_difference"], rows)
            else:
                write_json(out / f"{cfg.name}_bands_{label}.json", meta, report[label])
    return report


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, type=Path,
                        help="scenario JSON file (a directory for reproduce-tables)")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads, 0 = auto")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="corrdesign", description=__doc__.split("\n")[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("optimize", parents=[common], help="optimise design points for one scenario")
    sub.add_parser("evaluate", parents=[common], help="criterion value of a given design")
    sub.add_parser("reproduce-tables", parents=[common], help="run all reference scenarios in a directory")
    sub.add_parser("bands", parents=[common], help="simulate averaged confidence bands")
    return parser


def _summary(command: str, report: dict) -> str:
    if command == "optimize":
        o, u = report["optimal"], report["uniform"]
        return (f"{report['scenario']}: optimal {np.round(o['points'], 4).tolist()} "
                f"{report['criterion']}={o['value']:.4f}; uniform {report['criterion']}={u['value']:.4f}")
    if command == "evaluate":
        return f"{report['scenario']}: {report['criterion']}={report['design']['value']:.6g}"
    if command == "bands":
        return (f"{report['scenario']}: max width optimal={report['optimal']['max_width']:.4f} "
                f"uniform={report['uniform']['max_width']:.4f}")
    lines = [",".join(str(c) for c in report["header"])]
    lines += [",".join(f"{c:.6g}" if isinstance(c, float) else str(c) for c in row) for row in report["rows"]]
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
        if args.command == "reproduce-tables":
            report = run_reproduce_tables(args.config, args.out, args.format, args.seed)
        else:
            cfg = load_config(args.config, args.seed)
            if args.command == "optimize":
                report = run_optimize(cfg, args.out, args.format)
            elif args.command == "evaluate":
                report = run_evaluate(cfg, args.out, args.format)
            else:
                report = run_bands(cfg, args.out, args.format, args.threads)
    except (ConfigError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(_summary(args.command, report))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
