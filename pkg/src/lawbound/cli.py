"""Command-line interface.

Exit codes: 0 all checks satisfied, 1 usage or I/O error, 2 at least one
check failed (falsification).  Outputs are deterministic for a fixed
config and seed; `--seed` is mandatory on stochastic commands.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import certify as C
from . import ensemble as E
from . import euler as EU
from . import fields as F
from . import rollout as R
from . import sampler as SA
from . import scores as SC
from . import transport as T
from .acceptance import run_battery
from .reporting import (
    Report,
    read_ensemble,
    read_lawcurve,
    validate_config,
    write_csv,
    write_ensemble,
    write_lawcurve,
    write_lbf,
)

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _load_config(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise _UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise _UsageError(f"malformed config {path}: {exc}")


def _kernel_from_config(cfg: dict) -> SA.KernelSpec:
    allowed = {
        "kind": (str, "perturbed-reference"),
        "internal_steps": (int, 8),
        "noise_scale": (float, 0.0),
        "perturbation": (float, 0.0),
        "init": (str, "delta"),
        "noise_exponent": (float, 4.0),
        "noise_k_max": (int, 0),
        "pf_sigma_max": (float, 1.0),
    }
    out = validate_config(cfg, allowed, "kernel")
    return SA.KernelSpec(
        kind=out["kind"], internal_steps=out["internal_steps"],
        noise_scale=out["noise_scale"], perturbation=out["perturbation"],
        init=out["init"], noise_exponent=out["noise_exponent"],
        noise_k_max=out["noise_k_max"], pf_sigma_max=out["pf_sigma_max"],
    )


def _finish(report: Report, out_dir: Path, started: float) -> int:
    report.wall_time_s = time.time() - started
    out_dir.mkdir(parents=True, exist_ok=True)
    report.write(out_dir / "report.json")
    for c in report.checks:
        status = "PASS" if c.satisfied else "FAIL"
        print(f"[{status}] {c.name}: value={c.value:.6g} bound={c.bound:.6g}")
    return 0 if report.all_satisfied else 2


# ------------------------------------------------------------- subcommands

def cmd_gen(args) -> int:
    started = time.time()
    cfg = validate_config(_load_config(args.config), {
        "n": (int, 64),
        "members": (int, 16),
        "structure_exponent": (float, 0.5),
        "k_max": (int, 0),
        "normalize": (bool, True),
        "time": (float, 0.0),
        "structure_csv": (bool, False),
    }, "gen")
    grid = F.Grid(2, cfg["n"])
    k_max = cfg["k_max"] or grid.n // 4
    p = F.spectrum_exponent_for_structure(cfg["structure_exponent"])
    members = []
    for i in range(cfg["members"]):
        u = F.random_divfree(grid, p, k_max, seed=np.random.SeedSequence(
            [int(args.seed), i]))
        if cfg["normalize"]:
            u = F.GridField(grid, u.values / F.l2_norm(u))
        members.append(u)
    e = E.Ensemble.from_fields(members)
    out = Path(args.out)
    manifest = write_ensemble(out, e, time=cfg["time"])
    report = Report("gen", cfg | {"seed": args.seed})
    report.extra = {"manifest": manifest.name, "members": e.size}
    if cfg["structure_csv"]:
        lo, hi = E.default_fit_range(grid)
        radii = np.geomspace(lo, hi, 8)
        sc = E.pointwise_modulus(e, radii)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "structure.csv", ["r", "value"],
                  list(zip(sc.radii.tolist(), sc.values.tolist())))
        c0, s_fit, resid = E.fit_power_modulus(sc)
        report.extra["structure_fit"] = {"C0": c0, "s": s_fit,
                                         "residual": resid}
        report.add("gen.structure_exponent", s_fit,
                   cfg["structure_exponent"],
                   abs(s_fit - cfg["structure_exponent"]) <= 0.1, 0.1)
    return _finish(report, out, started)


def _read_initial_ensemble(path):
    """Accept an ensemble manifest or a law-curve manifest (final slice)."""
    doc = json.loads(Path(path).read_text())
    if doc.get("kind") == "lawcurve":
        curve = read_lawcurve(path)
        return curve.ensembles[-1], float(curve.times[-1])
    return read_ensemble(path)


def cmd_evolve(args) -> int:
    started = time.time()
    cfg = validate_config(_load_config(args.config), {
        "dt": (float, 0.00625),
        "horizon": (float, 0.25),
        "checkpoints": (int, 8),
    }, "evolve")
    if args.checkpoints is not None:
        cfg["checkpoints"] = args.checkpoints
    e, t0 = _read_initial_ensemble(args.ensemble)
    euler_cfg = EU.EulerConfig(e.grid, dt=cfg["dt"])
    times = None
    trajs = []
    for i in range(e.size):
        ts, fields_i = EU.evolve(e.member(i), euler_cfg, cfg["horizon"],
                                 checkpoints=cfg["checkpoints"])
        times = ts
        trajs.append(fields_i)
    ensembles = [E.Ensemble.from_fields([trajs[i][c] for i in range(e.size)])
                 for c in range(len(times))]
    curve = E.LawCurve(times, ensembles)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_lawcurve(out / "curve", curve)
    rows = []
    for c, ens in enumerate(ensembles):
        energies = [EU.energy(ens.member(i)) for i in range(ens.size)]
        enst = [EU.enstrophy(ens.member(i)) for i in range(ens.size)]
        divs = [F.divergence_norm(F.forward(ens.member(i)))
                for i in range(ens.size)]
        rows.append((float(times[c]), float(np.mean(energies)),
                     float(np.mean(enst)), float(np.max(divs))))
    write_csv(out / "conservation.csv",
              ["t", "energy", "enstrophy", "divergence"], rows)
    e0, eT = rows[0][1], rows[-1][1]
    drift = abs(eT - e0) / max(e0, 1e-300) / max(cfg["horizon"], 1e-300)
    report = Report("evolve", cfg)
    report.add("evolve.energy_drift_per_time", drift, 1e-6, drift <= 1e-6, 1e-6)
    return _finish(report, out, started)


def cmd_sample(args) -> int:
    started = time.time()
    raw = _load_config(args.config)
    kernel_cfg = raw.pop("kernel", {})
    cfg = validate_config(raw, {
        "dt_phys": (float, 0.05),
        "n_steps": (int, 4),
        "reference_dt": (float, 0.00625),
        "store_paths": (bool, False),
    }, "sample")
    spec = _kernel_from_config(kernel_cfg)
    e, _ = read_ensemble(args.ensemble)
    euler_cfg = EU.EulerConfig(e.grid, dt=cfg["reference_dt"])
    ref = EU.reference_step_map(euler_cfg, cfg["dt_phys"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report = Report("sample", cfg | {"kernel": kernel_cfg, "seed": args.seed})
    if spec.init == "delta":
        bundle, curve = SA.rollout_paths(e, spec, ref, cfg["dt_phys"],
                                         cfg["n_steps"], int(args.seed))
        if cfg["store_paths"]:
            pdir = out / "paths"
            pdir.mkdir(exist_ok=True)
            index = {"times": bundle.times.tolist(), "members": []}
            for i in range(bundle.size):
                names = []
                for c in range(bundle.states.shape[1]):
                    name = f"path_{i:03d}_{c:05d}.lbf"
                    write_lbf(pdir / name,
                              F.GridField(e.grid, bundle.states[i, c]))
                    names.append(name)
                index["members"].append(names)
            (pdir / "index.json").write_text(json.dumps(index, sort_keys=True))
    else:
        cur = e
        times = [0.0]
        ensembles = [cur]
        for n in range(cfg["n_steps"]):
            mapper = SA.kernel_map(spec, ref, int(args.seed), step=n)
            cur = E.Ensemble.from_fields([mapper(cur.member(i), i)
                                          for i in range(cur.size)])
            times.append((n + 1) * cfg["dt_phys"])
            ensembles.append(cur)
        curve = E.LawCurve(np.array(times), ensembles)
    write_lawcurve(out / "curve", curve)
    report.extra = {"n_steps": cfg["n_steps"], "members": e.size}
    return _finish(report, out, started)


def cmd_metrics(args) -> int:
    started = time.time()
    cfg = validate_config(_load_config(args.config), {
        "K_list": (list, [4, 8, 16]),
    }, "metrics")
    a, _ = read_ensemble(args.a)
    b, _ = read_ensemble(args.b)
    if a.grid != b.grid:
        raise _UsageError("metrics: ensembles live on different grids")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    report = Report("metrics", cfg)
    for K in cfg["K_list"]:
        rep = T.capacity_coverage(a, b, float(K))
        rows.append((float(K), rep.tail_a, rep.train_k, rep.bound, rep.w2))
        report.add(f"capacity.K{K}", rep.w2, rep.bound, rep.satisfied, 1e-9)
        report.extra[f"K{K}"] = rep.as_dict()
    write_csv(out / "sweep.csv", ["K", "tail_a", "train", "bound", "w2"], rows)
    return _finish(report, out, started)


def cmd_transport(args) -> int:
    started = time.time()
    cfg = validate_config(_load_config(args.config), {
        "epsilon": (float, 0.0),
        "max_iter": (int, 5000),
    }, "transport")
    doc_a = json.loads(Path(args.a).read_text())
    report = Report("transport", cfg)
    if doc_a.get("kind") == "lawcurve":
        ca = read_lawcurve(args.a)
        cb = read_lawcurve(args.b)
        d_t, w1s = T.time_integrated_w1(ca, cb)
        report.extra = {"d_T": d_t, "w1_per_time": w1s.tolist(),
                        "times": ca.times.tolist()}
        # d_T is bounded by the horizon times the worst per-time W1
        cap = float(ca.horizon * w1s.max()) if len(w1s) else 0.0
        report.add("transport.d_T", d_t, cap, d_t <= cap + 1e-12, 1e-12)
    else:
        a, _ = read_ensemble(args.a)
        b, _ = read_ensemble(args.b)
        w1, _ = T.wasserstein_exact(a, b, p=1)
        w2, _ = T.wasserstein_exact(a, b, p=2)
        report.extra = {"w1": w1, "w2": w2}
        if cfg["epsilon"] > 0:
            val, _ = T.sinkhorn(a, b, epsilon=cfg["epsilon"],
                                max_iter=cfg["max_iter"])
            report.extra["sinkhorn"] = val
        report.add("transport.w1_le_w2", w1, w2, w1 <= w2 + 1e-9, 1e-9)
    return _finish(report, Path(args.out), started)


def cmd_stability(args) -> int:
    started = time.time()
    cfg = validate_config(_load_config(args.config), {
        "dt": (float, 0.015625),
        "horizon": (float, 0.25),
        "checkpoints": (int, 8),
        "tol": (float, 1e-3),
    }, "stability")
    a, _ = read_ensemble(args.a)
    b, _ = read_ensemble(args.b)
    euler_cfg = EU.EulerConfig(a.grid, dt=cfg["dt"])
    rep = EU.w2_strain_bound_check(a, b, euler_cfg, cfg["horizon"],
                                   checkpoints=cfg["checkpoints"],
                                   tol=cfg["tol"])
    report = Report("stability", cfg)
    report.add("stability.w2_growth", rep["w2_t"], rep["w2_bound"],
               rep["w2_ok"], cfg["tol"])
    report.add("stability.coupled_moment", rep["moment_t"], rep["moment_bound"],
               rep["moment_ok"], cfg["tol"])
    report.add("stability.avg_below_sup", rep["strain_integral"],
               rep["sup_strain_integral"], rep["avg_below_sup"], 1e-12)
    report.extra = {k: rep[k] for k in ("times", "lambda_curve",
                                        "strain_integral",
                                        "sup_strain_integral")}
    return _finish(report, Path(args.out), started)


def cmd_rollout(args) -> int:
    started = time.time()
    raw = _load_config(args.config)
    kernel_cfg = raw.pop("kernel", {})
    cfg = validate_config(raw, {
        "dt": (float, 0.00625),
        "dt_phys": (float, 0.05),
        "n_steps": (int, 4),
        "checkpoints_per_window": (int, 8),
        "slack": (float, 5e-2),
    }, "rollout")
    spec = _kernel_from_config(kernel_cfg)
    a, _ = read_ensemble(args.a)
    b, _ = read_ensemble(args.b)
    euler_cfg = EU.EulerConfig(a.grid, dt=cfg["dt"])
    ledger, rep = R.run_rollout_experiment(
        a, b, euler_cfg, spec, n_steps=cfg["n_steps"],
        dt_phys=cfg["dt_phys"], master_seed=int(args.seed),
        checkpoints_per_window=cfg["checkpoints_per_window"],
        slack=cfg["slack"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "ledger.csv", ["n", "alpha", "eps", "delta", "bound"],
              [(r["n"], r["alpha"], r["eps"], r["delta"], r["bound"])
               for r in ledger.rows()])
    report = Report("rollout", cfg | {"kernel": kernel_cfg, "seed": args.seed})
    report.add("rollout.final", rep["delta_final"], rep["bound_final"],
               rep["final_ok"], cfg["slack"])
    report.add("rollout.per_step", float(rep["per_step_ok"]), 1.0,
               rep["per_step_ok"], cfg["slack"])
    report.extra = {k: rep[k] for k in ("alpha_total", "max_defect",
                                        "violations", "guard_events")}
    return _finish(report, out, started)


def cmd_certify(args) -> int:
    started = time.time()
    cfg = validate_config(_load_config(args.config), {
        "n": (int, 32),
        "members": (int, 6),
        "k": (int, 1),
        "K": (float, 8.0),
        "k_test": (int, 4),
        "epsilon": (float, 1e-2),
        "n_steps": (int, 512),
        "horizon": (float, 0.5),
        "rel_tol": (float, 1e-5),
    }, "certify")
    grid = F.Grid(2, cfg["n"])
    rep = C.certification_report(
        grid, members=cfg["members"], k=cfg["k"], K=cfg["K"],
        k_test=cfg["k_test"], epsilon=cfg["epsilon"],
        n_steps=cfg["n_steps"], horizon=cfg["horizon"],
        seed=int(args.seed), rel_tol=cfg["rel_tol"])
    report = Report("certify", cfg | {"seed": args.seed})
    report.add("certify.cross_route", rep["rel_gap"], cfg["rel_tol"],
               rep["routes_agree"], cfg["rel_tol"])
    report.add("certify.regression_bound", abs(rep["residual_defect"]),
               rep["bound"], rep["satisfied"], 1e-9)
    report.extra = {k: rep[k] for k in
                    ("residual_direct", "residual_defect", "rel_gap",
                     "l_drift", "m_2k", "bound")}
    return _finish(report, Path(args.out), started)


def cmd_pfode(args) -> int:
    started = time.time()
    cfg = validate_config(_load_config(args.config), {
        "dim": (int, 4),
        "c": (float, 0.2),
        "tau_nodes": (int, 33),
        "mc_size": (int, 4096),
        "sigma0": (float, 1.0),
        "sigma_slope": (float, 0.0),
    }, "pfode")
    rng = np.random.default_rng(int(args.seed))
    q = cfg["dim"]
    A = rng.standard_normal((q, q)) * 0.3
    gd = C.GaussianDiffusion(mean=rng.standard_normal(q),
                             cov=A @ A.T + np.eye(q),
                             sigma0=cfg["sigma0"],
                             sigma_slope=cfg["sigma_slope"])
    rep = C.pf_identities(gd, np.linspace(0, 1, cfg["tau_nodes"]),
                          c=cfg["c"], mc_size=cfg["mc_size"],
                          seed=int(args.seed) + 1)
    report = Report("pfode", cfg | {"seed": args.seed})
    report.add("pfode.identity", rep["per_tau_gap"], 1e-10,
               rep["per_tau_ok"], 1e-10)
    report.add("pfode.integrated", rep["integrated_gap"], 1e-10,
               rep["integrated_ok"], 1e-10)
    report.add("pfode.marginals", max(rep["mean_zmax"], rep["cov_zmax"]),
               3.0, rep["marginals_ok"], 0.0)
    report.extra = {"taus": rep["taus"], "lhs": rep["lhs_curve"],
                    "rhs": rep["rhs_curve"]}
    return _finish(report, Path(args.out), started)


def cmd_scores(args) -> int:
    started = time.time()
    raw = _load_config(args.config)
    obs_cfg = raw.pop("observable", {})
    cfg = validate_config(raw, {}, "scores")
    obs_cfg = validate_config(obs_cfg, {
        "kind": (str, "mollified"),
        "location": (list, [np.pi, np.pi]),
        "component": (int, 0),
        "width": (float, 0.5),
    }, "observable")
    ca = read_lawcurve(args.a)
    cb = read_lawcurve(args.b)
    if obs_cfg["kind"] != "mollified":
        raise _UsageError(f"scores: unknown observable kind {obs_cfg['kind']!r}")
    obs = SC.mollified_point_observable(
        ca.grid, obs_cfg["location"], obs_cfg["component"], obs_cfg["width"],
        m=ca.ensembles[0].m)
    rep = SC.crps_dT_check(ca, cb, obs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "scores.csv", ["t", "crps", "w1_pushforward", "bound"],
              [(r["t"], r["crps"], r["w1_pushforward"], r["bound"])
               for r in rep["rows"]])
    report = Report("scores", cfg | {"observable": obs_cfg})
    report.add("scores.crps_dT", rep["crps_integral"],
               2.0 * rep["lipschitz"] * rep["d_T"],
               rep["integral_ok"], 1e-9)
    report.add("scores.per_time_chain", float(rep["per_time_ok"]), 1.0,
               rep["per_time_ok"], 1e-9)
    report.extra = {"d_T": rep["d_T"], "lipschitz": rep["lipschitz"]}
    return _finish(report, out, started)


def cmd_verify_all(args) -> int:
    started = time.time()
    checks = run_battery(quick=args.quick, seed=int(args.seed), log=print)
    report = Report("verify-all", {"quick": bool(args.quick),
                                   "seed": args.seed})
    report.checks = checks
    report.wall_time_s = time.time() - started
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "report.json")
    n_fail = sum(not c.satisfied for c in checks)
    print(f"{len(checks) - n_fail}/{len(checks)} checks satisfied")
    return 0 if n_fail == 0 else 2


# ------------------------------------------------------------------ parser

def _build_parser() -> _Parser:
    p = _Parser(prog="lawbound", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, seed=False, ensemble=False, pair=False, curve_pair=False):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None)
        sp.add_argument("--out", required=True)
        if seed:
            sp.add_argument("--seed", required=True, type=int)
        if ensemble:
            sp.add_argument("--ensemble", required=True)
        if pair or curve_pair:
            sp.add_argument("--a", required=True)
            sp.add_argument("--b", required=True)
        sp.set_defaults(fn=fn)
        return sp

    add("gen", cmd_gen, seed=True)
    evp = add("evolve", cmd_evolve, ensemble=True)
    evp.add_argument("--checkpoints", type=int, default=None)
    add("sample", cmd_sample, seed=True, ensemble=True)
    add("metrics", cmd_metrics, pair=True)
    add("transport", cmd_transport, pair=True)
    add("stability", cmd_stability, pair=True)
    add("rollout", cmd_rollout, seed=True, pair=True)
    add("certify", cmd_certify, seed=True)
    add("pfode", cmd_pfode, seed=True)
    add("scores", cmd_scores, curve_pair=True)
    va = sub.add_parser("verify-all")
    va.add_argument("--quick", action="store_true")
    va.add_argument("--seed", required=True, type=int)
    va.add_argument("--out", required=True)
    va.set_defaults(fn=cmd_verify_all)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
