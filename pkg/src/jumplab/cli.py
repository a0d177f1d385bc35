"""Batch front door: schedule, simulate, hierarchy and validate runs.

Exit codes: 0 success, 1 configuration/validation error (including
series-step refusals), 2 invariant or bound failure, 3 anomaly cap.
All floating-point output carries 17 significant digits so identical
configurations and seeds produce byte-identical artifacts.
"""

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import estimators as est
from . import hierarchy as hi
from . import kmc
from . import outputs as out
from . import scheduler as sc
from .backend import backend_name
from .hierarchy import HorizonError, OverflowGuardError
from .runconfig import ConfigError, load_config
from .validate import run_all

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BOUND = 2
EXIT_ANOMALY = 3


def _manifest_base(config, command):
    return {
        "command": command,
        "version": __version__,
        "backend": backend_name(),
        "config": config.manifest_entry(),
    }


def cmd_schedule(config, outdir):
    kernels = config.kernels()
    if kernels.mean_phi <= 0:
        raise ConfigError("the scheduler needs a nonvanishing potential")
    sched = config["scheduler"]
    params = sc.ScaleParams(alpha=kernels.alpha, mean_phi=kernels.mean_phi,
                            C=config.bound_constant(),
                            epsilon=sched["epsilon"])
    ladder = sc.build_ladder(params, sched["t_target"],
                             max_steps=sched["max_steps"])
    certs = [sc.norm_certificate(ladder.theta_star[n], ladder.theta_high[n],
                                 ladder.steps[n], params)
             for n in range(ladder.n_steps)]
    out.write_csv(Path(outdir) / "ladder.csv",
                  ["n", "theta_star", "delta", "tau", "s_n", "cumulative"],
                  ladder.rows())
    out.write_json(Path(outdir) / "certificates.json",
                   [c.as_dict() for c in certs])
    manifest = _manifest_base(config, "schedule")
    manifest.update({
        "alpha": params.alpha,
        "mean_phi": params.mean_phi,
        "bound_constant": params.C,
        "epsilon": params.epsilon,
        "t_target": sched["t_target"],
        "n_steps": ladder.n_steps,
        "reached_target": ladder.reached_target,
        "anomaly": ladder.anomaly,
        "all_certificates_valid": all(c.valid for c in certs),
    })
    out.write_json(Path(outdir) / "manifest.json", manifest)
    if ladder.anomaly:
        print(f"schedule: anomaly: {ladder.anomaly}", file=sys.stderr)
        return EXIT_ANOMALY
    if not all(c.valid for c in certs):
        return EXIT_BOUND
    print(f"schedule: reached t={sched['t_target']} in {ladder.n_steps} steps")
    return EXIT_OK


def _initial_factory(config, domain):
    init = config["initial"]
    kind = init["kind"]
    if kind == "poisson":
        kappa = init["kappa"]
        return lambda rng: kmc.poisson_configuration(domain, kappa, rng)
    if kind == "jittered-grid":
        per_axis, jitter = init["per_axis"], init["jitter"]
        return lambda rng: kmc.jittered_grid_configuration(
            domain, per_axis, jitter, rng)
    raise ConfigError(
        "initial.kind=custom-field drives the hierarchy command only")


def cmd_simulate(config, outdir):
    domain = config.domain()
    kernels = config.kernels()
    dyn = config["dynamics"]
    estc = config["estimators"]
    factory = _initial_factory(config, domain)
    replicas = kmc.run_replicas(factory, kernels, dyn["t_end"],
                                dyn["snapshot_dt"], dyn["seed"],
                                dyn["replicas"], threads=dyn["threads"])
    times = replicas[0].times
    r_max = estc["r_max"]
    if r_max is None:
        r_max = min(domain.side_length / 2.0, 10.0)
    if r_max > domain.side_length / 2.0:
        raise ConfigError("estimators.r_max beyond L/2 is ambiguous")
    edges = np.linspace(0.0, r_max, estc["bins"] + 1)
    C = config.bound_constant()
    estimates = []
    checks = []
    extra_rows = []
    for t in times:
        configs = est.configs_at(replicas, t)
        d1 = est.density_estimate(configs, t)
        d2 = est.pair_correlation_estimate(configs, t, edges)
        estimates.extend([d1, d2])
        checks.append(est.sub_poissonian_check_estimates(
            [d1, d2], C, kernels.alpha))
        if estc["third_moment"]:
            m3, e3 = est.third_factorial_moment(configs, t)
            extra_rows.append({"t": t, "n": 3, "bin_lo": 0.0, "bin_hi": 0.0,
                               "k_hat": m3, "stderr": e3})
            bound3 = C ** 3 * math.exp(3 * t * kernels.alpha)
            margin3 = min(bound3 + 3 * e3 - m3, m3 + 3 * e3)
            checks.append(est.BoundCheckResult(rows=[est.BoundCheckRow(
                t=t, order=3, bound=bound3, worst_value=m3, margin=margin3,
                passed=margin3 >= 0.0)]))
    variance_verdict = None
    if estc["variance_window"] > 0:
        w = estc["variance_window"]
        if w > domain.side_length:
            raise ConfigError("variance window larger than the domain")
        t_last = times[-1]
        cfgs = est.configs_at(replicas, t_last)
        d1 = est.density_estimate(cfgs, t_last)
        d2 = est.pair_correlation_estimate(cfgs, t_last, edges)
        vres = est.variance_positivity_check(
            d1, d2, np.zeros(domain.dimension),
            np.full(domain.dimension, w))
        variance_verdict = {"value": vres.value, "sigma": vres.sigma,
                            "passed": vres.passed}
    out.write_csv(Path(outdir) / "moments.csv",
                  ["t", "n", "bin_lo", "bin_hi", "k_hat", "stderr"],
                  out.moment_rows(estimates) + extra_rows)
    out.write_csv(Path(outdir) / "bounds.csv",
                  ["t", "n", "bound", "worst_value", "margin", "pass"],
                  out.bound_rows(checks))
    if config["outputs"]["write_snapshots"]:
        for r, rep in enumerate(replicas):
            out.write_csv(
                Path(outdir) / "snapshots" / f"replica_{r:04d}.csv",
                out.snapshot_fieldnames(domain.dimension),
                out.snapshot_rows(rep))
    accepts = sum(r.counters["accepts"] for r in replicas)
    proposals = sum(r.counters["proposals"] for r in replicas)
    all_pass = all(c.passed for c in checks) and (
        variance_verdict is None or variance_verdict["passed"])
    manifest = _manifest_base(config, "simulate")
    manifest.update({
        "kernels": kernels.manifest_entry(),
        "seed": dyn["seed"],
        "replicas": dyn["replicas"],
        "acceptance_ratio": accepts / proposals if proposals else None,
        "snapshot_times": list(times),
        "bound_constant": C,
        "bound_checks_passed": all_pass,
        "worst_margin": min(c.worst_margin for c in checks),
        "variance_check": variance_verdict,
    })
    out.write_json(Path(outdir) / "manifest.json", manifest)
    if not all_pass:
        print("simulate: moment bound check failed", file=sys.stderr)
        return EXIT_BOUND
    print(f"simulate: {dyn['replicas']} replicas to t={dyn['t_end']}, "
          f"all bound checks passed")
    return EXIT_OK


def _load_custom_field(config, lattice_kernels):
    path = config["initial"]["field_file"]
    if not path:
        raise ConfigError("custom-field initial data needs initial.field_file")
    hier = config["hierarchy"]
    s = lattice_kernels.grid.n_sites
    k1 = np.zeros(s)
    k2 = np.zeros((s, s))
    for line in Path(path).read_text().splitlines()[1:]:
        if not line.strip():
            continue
        n, idx, val = line.split(",")
        n, idx, val = int(n), int(idx), float(val)
        if n == 1:
            k1[idx] = val
        elif n == 2:
            k2[idx // s, idx % s] = val
        else:
            raise ConfigError("custom fields carry orders 1 and 2")
    if not np.allclose(k2, k2.T):
        raise ConfigError("custom k2 must be symmetric")
    return hi.CorrelationField(
        kernels=lattice_kernels, mode="grid", k1=k1, k2=k2,
        closure=hi.ClosureRule(hier["closure"], 2),
        qy_order=hier["qy_order"])


def _initial_field(config, lattice_kernels):
    hier = config["hierarchy"]
    init = config["initial"]
    closure = hi.ClosureRule(hier["closure"], hier["n_max"])
    mode = hier["mode"]
    if hier["n_max"] == 3 and mode == "ti":
        raise ConfigError("hierarchy.n_max=3 requires hierarchy.mode=grid")
    if init["kind"] == "custom-field":
        if hier["n_max"] == 3:
            raise ConfigError("custom fields carry orders 1 and 2")
        return _load_custom_field(config, lattice_kernels)
    return hi.poisson_field(lattice_kernels, init["kappa"], mode=mode,
                            closure=closure, qy_order=hier["qy_order"])


def _trajectory_rows(times_fields, mode):
    rows = []
    for t, f in times_fields:
        if mode == "ti":
            rows.append({"t": t, "n": 1, "sep_index": 0, "value": float(f.k1)})
            for r, v in enumerate(f.k2):
                rows.append({"t": t, "n": 2, "sep_index": r,
                             "value": float(v)})
        else:
            for i, v in enumerate(np.asarray(f.k1)):
                rows.append({"t": t, "n": 1, "sep_index": i,
                             "value": float(v)})
            s = f.k2.shape[0]
            for u in range(s):
                for v in range(s):
                    rows.append({"t": t, "n": 2, "sep_index": u * s + v,
                                 "value": float(f.k2[u, v])})
    return rows


def _tail_bound(field, theta):
    """Bound on the dropped crowding-correction tail at scale theta."""
    lk = field.kernels
    b = math.exp(theta) * abs(lk.t_integral)
    partial = sum(b ** m / math.factorial(m)
                  for m in range(field.qy_order + 1))
    return hi.scale_norm(field, theta).norm_value * (math.exp(b) - partial)


def cmd_hierarchy(config, outdir):
    lk = config.lattice_kernels()
    hier = config["hierarchy"]
    field0 = _initial_field(config, lk)
    C = config.bound_constant()
    alpha = lk.alpha
    if lk.mean_phi > 0:
        params = sc.ScaleParams.from_lattice(lk, C=C,
                                             epsilon=config["scheduler"]["epsilon"])
        theta_low = params.theta_star
        theta_high = theta_low + sc.delta_theta(theta_low, params)
        horizon = sc.horizon_T(theta_high, theta_low, alpha, lk.mean_phi)
    else:
        params = None
        theta_low = math.log(C)
        theta_high = theta_low + 1.0
        horizon = sc.horizon_Tbar(theta_high, theta_low, alpha)
    manifest = _manifest_base(config, "hierarchy")
    manifest.update({"lattice": lk.manifest_entry(), "bound_constant": C,
                     "theta_low": theta_low, "theta_high": theta_high,
                     "horizon": horizon})
    taylor_info = None
    if hier["integrator"] == "taylor":
        t_step = (hier["horizon_fraction"] * horizon
                  if hier["use_horizon_fraction"] else hier["t_end"])
        if params is not None:
            cert = sc.norm_certificate(theta_low, theta_high, t_step, params)
            manifest["certificate"] = cert.as_dict()
            if not cert.valid:
                out.write_json(Path(outdir) / "manifest.json", manifest)
                print("hierarchy: refusing a series step at or beyond the "
                      f"horizon: t={t_step} >= T={cert.horizon} for scales "
                      f"({theta_low}, {theta_high})", file=sys.stderr)
                return EXIT_CONFIG
        stepped, diag = hi.taylor_semigroup_step(
            field0, t_step, hier["taylor_order"],
            theta_low=theta_low, theta_high=theta_high)
        trajectory = [(0.0, field0), (t_step, stepped)]
        rk_traj = hi.integrate_rk4(field0, t_step, hier["dt"],
                                   guard=hier["overflow_guard"])
        rk_final = rk_traj[-1][1]
        scale = max(stepped.max_abs(), 1e-300)
        rel = max(abs(np.max(np.abs(np.atleast_1d(stepped.k1)
                                    - np.atleast_1d(rk_final.k1)))),
                  float(np.max(np.abs(stepped.k2 - rk_final.k2)))) / scale
        taylor_info = {
            "t_step": t_step,
            "order": hier["taylor_order"],
            "last_term_norm": diag.last_term_norm,
            "tail_bound": diag.tail_bound,
            "rk4_relative_difference": rel,
        }
        manifest["taylor"] = taylor_info
        diags = [(t_step, diag.last_term_norm)]
    else:
        n_steps = int(round(hier["t_end"] / hier["dt"]))
        record_every = max(1, n_steps // 100)
        trajectory = hi.integrate_rk4(field0, hier["t_end"], hier["dt"],
                                      guard=hier["overflow_guard"],
                                      record_every=record_every)
        diags = [(t, 0.0) for t, _ in trajectory]
    mode = field0.mode
    out.write_csv(Path(outdir) / "trajectory.csv",
                  ["t", "n", "sep_index", "value"],
                  _trajectory_rows(trajectory, mode))
    diag_rows = []
    checks = []
    for (t, f) in trajectory:
        theta_t = math.log(C) + alpha * t
        diag_rows.append({
            "t": t,
            "last_taylor_term": dict(diags).get(t, 0.0),
            "closure_tail_bound": _tail_bound(f, theta_t),
            "norm_theta": hi.scale_norm(f, theta_t).norm_value,
        })
        checks.append(est.sub_poissonian_check_field(f, C, alpha, t))
    out.write_csv(Path(outdir) / "diagnostics.csv",
                  ["t", "last_taylor_term", "closure_tail_bound",
                   "norm_theta"], diag_rows)
    out.write_csv(Path(outdir) / "bounds.csv",
                  ["t", "n", "bound", "worst_value", "margin", "pass"],
                  out.bound_rows(checks))
    all_pass = all(c.passed for c in checks)
    manifest["domination_passed"] = all_pass
    manifest["worst_margin"] = min(c.worst_margin for c in checks)
    out.write_json(Path(outdir) / "manifest.json", manifest)
    if not all_pass:
        print("hierarchy: domination bound violated", file=sys.stderr)
        return EXIT_BOUND
    msg = (f"taylor step to t={taylor_info['t_step']:.6g}, rk4 relative "
           f"difference {taylor_info['rk4_relative_difference']:.3e}"
           if taylor_info else
           f"rk4 trajectory to t={hier['t_end']}")
    print(f"hierarchy: {msg}; domination bound holds")
    return EXIT_OK


def cmd_validate(config, outdir):
    results = run_all(config)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"[{status}] {r.name}: {r.detail} (margin {r.margin:.3e})")
    out.write_json(Path(outdir) / "report.json",
                   {"results": [r.as_dict() for r in results],
                    "all_passed": all(r.passed for r in results)})
    return EXIT_OK if all(r.passed for r in results) else EXIT_BOUND


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jumplab",
        description="conservative jump dynamics with repulsion: simulator, "
                    "correlation hierarchy, horizon scheduler")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("schedule", cmd_schedule), ("simulate", cmd_simulate),
                     ("hierarchy", cmd_hierarchy), ("validate", cmd_validate)):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="run configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override dynamics.seed")
        p.add_argument("--threads", type=int, default=None,
                       help="override dynamics.threads")
        p.add_argument("--set", action="append", default=[],
                       metavar="SECTION.KEY=VALUE",
                       help="override any config value (repeatable)")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"dynamics.seed={args.seed}")
    if args.threads is not None:
        overrides.append(f"dynamics.threads={args.threads}")
    if args.out is not None:
        overrides.append(f"outputs.directory={args.out}")
    try:
        config = load_config(args.config, overrides)
        outdir = config["outputs"]["directory"]
        return args.func(config, outdir)
    except (ConfigError, HorizonError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OverflowGuardError as exc:
        print(f"overflow guard: {exc}", file=sys.stderr)
        return EXIT_BOUND
    except sc.LadderAnomalyError as exc:
        print(f"anomaly: {exc}", file=sys.stderr)
        return EXIT_ANOMALY


if __name__ == "__main__":
    sys.exit(main())
