"""``sgm`` command line: run, verify, eof, ensemble.

Exit codes: 0 success, 1 verification fail or inconclusive, 2 usage or
config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import algebra as A
from . import config as C
from . import dynamics as D
from . import eof as E
from . import fields as F
from . import kelvin as K
from . import sgmf
from . import verification as V

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

NUMERICAL_ERRORS = (
    D.ConvergenceError,
    D.CFLError,
    F.NonzeroMeanError,
    K.NonpositiveDensityError,
    FloatingPointError,
)


class UsageError(Exception):
    pass


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def write_json(path, obj):
    Path(path).write_text(json.dumps(V._jsonable(obj), indent=2, sort_keys=True) + "\n")


# -- building experiments -----------------------------------------------------------


def _field_from_spec(spec, grid, kind, base_dir, what):
    if isinstance(spec, str):
        f = sgmf.load_field(C.resolve_path(spec, base_dir))
        if f.grid != grid:
            raise C.ConfigError(f"{what}: file grid {f.grid} differs from config grid {grid}")
        if f.kind != kind:
            raise C.ConfigError(f"{what}: file holds a {f.kind} field, expected {kind}")
        return f
    return F.Field(kind, C.modes_to_array(spec, grid), grid)


def _xi_from_spec(spec, grid, base_dir):
    if isinstance(spec, str):
        return _field_from_spec(spec, grid, "vector", base_dir, "noise field")
    return F.velocity_from_stream(C.modes_to_array(spec, grid), grid)


def build_fluid(cfg, base_dir=None):
    g = cfg["grid"]
    grid = F.Grid2D(g["nx"], g["ny"], g["Lx"], g["Ly"])
    omega = _field_from_spec(cfg["initial"]["vorticity"], grid, "scalar", base_dir, "vorticity")
    mean = float(np.mean(omega.values))
    if abs(mean) > 1e-10 * max(1.0, float(np.max(np.abs(omega.values)))):
        raise C.ConfigError(f"initial vorticity must have zero mean on the torus, mean is {mean:.3e}")
    b_spec = cfg["initial"]["buoyancy"]
    b = _field_from_spec(b_spec, grid, "scalar", base_dir, "buoyancy") if b_spec is not None else None
    xis = [_xi_from_spec(s, grid, base_dir) for s in cfg["noise"]["xis"]]
    noise = D.NoiseModel(xis, amplitude=cfg["noise"]["amplitude"]) if xis else None
    model = D.Euler2D(grid, cfg["model"]["gravity"])
    return grid, omega, b, noise, model


def build_finite(cfg):
    real = cfg["realization"]
    mp = cfg["model"]
    try:
        if real == "rigid_body":
            L = D.RigidBody(mp["inertia"])
            y0 = A.DualElement(np.array(cfg["initial"]["m"], dtype=float), None, real)
        else:
            L = D.HeavyTop(mp["inertia"], mp["mgl"], mp["chi"])
            y0 = A.DualElement(
                np.array(cfg["initial"]["m"], dtype=float), np.array(cfg["initial"]["a"], dtype=float), real
            )
    except D.SingularModelError as exc:
        raise C.ConfigError(str(exc)) from None
    xis = [np.array(x, dtype=float) for x in cfg["noise"]["xis"]]
    noise = D.NoiseModel(xis, amplitude=cfg["noise"]["amplitude"]) if xis else None
    return L, y0, noise


def _n_steps(cfg):
    return int(round(cfg["T"] / cfg["dt"]))


def _run_finite(cfg, out):
    L, y0, noise = build_finite(cfg)
    M = noise.M if noise else 0
    path = D.sample_brownian(cfg["seed"], cfg["dt"], _n_steps(cfg), M)
    traj = D.run_lie_poisson(
        y0, L, noise, path, tol=cfg["tolerances"]["fixed_point"], save_every=cfg["save_every"]
    )
    rep = V.casimir_energy_report(traj, L)
    cas = np.array(rep.details["casimir_series"])
    energy = np.array(rep.details["energy_series"])
    names = ["m1", "m2", "m3"] + (["a1", "a2", "a3"] if cfg["realization"] == "heavy_top" else [])
    header = ["t"] + names + [f"casimir{i + 1}" for i in range(cas.shape[1])] + ["energy"]
    rows = [[t, *s, *c, e] for t, s, c, e in zip(traj.times, traj.states, cas, energy)]
    write_csv(out / "states.csv", header, rows)
    return {
        "casimir_drift": rep.details["casimir_drift"],
        "casimir_drift_by_index": rep.details["casimir_drift_by_index"],
        "energy_drift": rep.details["energy_excursion"],
        "energy_excursion": rep.details["energy_excursion"],
        "energy_initial": float(energy[0]),
        "energy_final": float(energy[-1]),
    }


def _run_fluid(cfg, out, base_dir):
    grid, omega, b, noise, model = build_fluid(cfg, base_dir)
    M = noise.M if noise else 0
    dt, n = cfg["dt"], _n_steps(cfg)
    tol = cfg["tolerances"]["fixed_point"]
    cfl_mode = cfg["tolerances"]["cfl_mode"]
    path = D.sample_brownian(cfg["seed"], dt, n, M)
    states = out / "states"
    states.mkdir(exist_ok=True)
    energies = []

    def save(k, om, bb):
        u = F.velocity_from_vorticity(om)
        energies.append((k * dt, 0.5 * F.pair_fields(u, u)))
        if k % cfg["save_every"] == 0 or k == n:
            sgmf.save_field(om, states / f"omega_{k:06d}.sgmf")
            sgmf.save_field(u, states / f"u_{k:06d}.sgmf")
            if bb is not None:
                sgmf.save_field(bb, states / f"b_{k:06d}.sgmf")

    summary = {"grid": [grid.nx, grid.ny]}
    save(0, omega, b)
    if cfg["loop"] is not None:
        lp = cfg["loop"]
        loop = K.circle_loop(lp["center"], lp["radius"], lp["n"])
        rec = K.run_circulation_budget(
            omega, loop, noise, dt, cfg["T"], cfg["seed"], model=model, b0=b, path=path,
            cfl_mode=cfl_mode, tol=tol, callback=lambda k, om, bb, _: save(k, om, bb),
        )
        write_csv(
            out / "circulation.csv",
            ["t", "I", "cumulative_source"],
            zip(rec.times, rec.I_values, rec.source_values),
        )
        summary.update(
            circulation_initial=rec.I_values[0],
            circulation_final=rec.I_values[-1],
            circulation_drift=rec.relative_drift(),
            max_circulation_drift=rec.max_relative_drift(),
            cumulative_source=rec.source_values[-1],
            budget_residual=rec.budget_residual(),
        )
    else:
        for k in range(n):
            dW = path.increments[k]
            if b is not None:
                omega, b = D.boussinesq_step(omega, b, model, noise, dt, dW, tol=tol, cfl_mode=cfl_mode)
            else:
                omega = D.salt_euler_step(omega, noise, dt, dW, tol=tol, cfl_mode=cfl_mode)
            save(k + 1, omega, b)
    E_ = np.array([e for _, e in energies])
    write_csv(out / "energy.csv", ["t", "kinetic_energy"], energies)
    summary.update(
        energy_initial=float(E_[0]),
        energy_final=float(E_[-1]),
        energy_excursion=float(np.max(np.abs(E_ - E_[0]))),
    )
    return summary


def run_experiment(cfg, out, base_dir=None):
    """Run one member; writes artifacts into ``out`` and returns the summary dict."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    stored = dict(cfg, output=".")
    (out / "config.json").write_text(C.emit(stored))
    if cfg["realization"] == "euler2d":
        body = _run_fluid(cfg, out, base_dir)
    else:
        body = _run_finite(cfg, out)
    summary = {
        "realization": cfg["realization"],
        "seed": cfg["seed"],
        "dt": cfg["dt"],
        "T": cfg["T"],
        "n_steps": _n_steps(cfg),
        "noise_channels": len(cfg["noise"]["xis"]),
        "status": "ok",
        **body,
    }
    write_json(out / "summary.json", summary)
    # wall time kept apart so summary.json stays byte-reproducible
    write_json(out / "timing.json", {"wall_time_s": time.perf_counter() - t0})
    return summary


# -- commands ---------------------------------------------------------------------


def _load_cfg(args):
    if not args.config:
        raise UsageError("--config is required")
    cfg = C.load(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    base = Path(args.config).parent if Path(args.config).is_file() else None
    return cfg, base


def _say(args, *msg):
    if not args.quiet:
        print(*msg)


def cmd_run(args):
    cfg, base = _load_cfg(args)
    out = Path(args.out or cfg["output"])
    summary = run_experiment(cfg, out, base)
    _say(args, json.dumps(V._jsonable(summary), indent=2, sort_keys=True))
    return EXIT_OK


def _parse_floats(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _suite_reports(args):
    seed = args.seed if args.seed is not None else None
    kw = {} if seed is None else {"seed": seed}
    s = args.suite
    if s == "chainrule":
        return [V.check_lie_chain_rule(**kw)]
    if s == "kiw":
        opts = dict(kw, case=args.case or "full", kind=args.kind or "scalar")
        if args.dt:
            opts["dts"] = _parse_floats(args.dt)
        if args.T is not None:
            opts["T"] = args.T
        if args.paths is not None:
            opts["n_paths"] = args.paths
        return [V.check_kiw(**opts)]
    if s == "variation":
        opts = dict(kw, case=args.case or "generic")
        if args.dt:
            opts["dts"] = _parse_floats(args.dt)
        return [V.check_variation_lemma(**opts)]
    if s == "duality":
        reals = [args.realization] if args.realization else ["rigid_body", "heavy_top", "euler2d"]
        out = []
        for r in reals:
            n = args.n_samples or (50 if r == "euler2d" else 1000)
            out.append(V.check_dualities(r, n, **kw))
        return out
    if s == "casimir":
        T = args.T if args.T is not None else 10.0
        dt = _parse_floats(args.dt)[0] if args.dt else 1e-3
        sd = seed if seed is not None else 0
        reps = []
        for preset, xi in (("rigid_body", [0.0, 0.0, 1.0]), ("heavy_top", [0.3, 0.0, 1.0])):
            cfg = C.normalize({"preset": preset, "noise": {"xis": [xi]}, "dt": dt, "T": T, "seed": sd})
            L, y0, noise = build_finite(cfg)
            path = D.sample_brownian(sd, dt, _n_steps(cfg), 1)
            traj = D.run_lie_poisson(y0, L, noise, path, save_every=10)
            rep = V.casimir_energy_report(traj, L)
            for k in ("casimir_series", "energy_series"):
                rep.details.pop(k)
            reps.append(rep)
        return reps
    raise UsageError(f"unknown suite {s!r}; choose from chainrule, kiw, variation, duality, casimir")


def cmd_verify(args):
    try:
        reports = _suite_reports(args)
    except ValueError as exc:
        if isinstance(exc, NUMERICAL_ERRORS):
            raise
        raise UsageError(str(exc)) from None
    statuses = [r.status for r in reports]
    status = "pass" if all(s == "pass" for s in statuses) else (
        "fail" if "fail" in statuses else "inconclusive"
    )
    doc = {"suite": args.suite, "status": status, "reports": [r.to_dict() for r in reports]}
    text = json.dumps(V._jsonable(doc), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / f"verify_{args.suite}.json").write_text(text + "\n")
    _say(args, text)
    return EXIT_OK if status == "pass" else EXIT_FAIL


def cmd_eof(args):
    try:
        K_ = int(args.K)
    except ValueError:
        raise UsageError(f"K must be an integer, got {args.K!r}") from None
    ens = E.load_ensemble(args.input)
    res = E.compute_eof(ens, K_)
    if K_ > res.rank > 0:
        raise UsageError(f"K={K_} exceeds the ensemble rank {res.rank}; at most {res.rank} modes carry variance")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, m in enumerate(res.modes):
        sgmf.save_field(m, out / f"mode_{i:03d}.sgmf")
    sgmf.save_field(res.mean_field, out / "mean.sgmf")
    tot = res.total_variance
    rows = [[i, s, (s * s / tot) if tot > 0 else 0.0] for i, s in enumerate(res.singular_values)]
    write_csv(out / "singular_values.csv", ["mode", "singular_value", "variance_fraction"], rows)
    _say(args, f"wrote {res.K} modes (rank {res.rank}) to {out}")
    return EXIT_OK


def _member_job(cfg_text, base_dir, out_dir):
    cfg = json.loads(cfg_text)
    try:
        summary = run_experiment(cfg, out_dir, base_dir)
        return {"status": "ok", "summary": V._jsonable(summary)}
    except NUMERICAL_ERRORS as exc:
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def _workers(n):
    cap = os.environ.get("SGM_NUM_WORKERS")
    try:
        w = int(cap) if cap else (os.cpu_count() or 1)
    except ValueError:
        raise UsageError(f"SGM_NUM_WORKERS must be an integer, got {cap!r}") from None
    return max(1, min(n, w))


def run_ensemble(cfg, out, base_dir=None, workers=None):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    N = cfg["ensemble"]
    jobs = []
    for i in range(N):
        member = dict(cfg, seed=cfg["seed"] + i)
        jobs.append((json.dumps(member), base_dir, str(out / f"member_{i:03d}")))
    workers = workers or _workers(N)
    if workers == 1:
        results = [_member_job(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_member_job, *zip(*jobs)))
    rows, failures = [], []
    cols = ["casimir_drift", "energy_excursion", "circulation_drift", "budget_residual"]
    for i, r in enumerate(results):
        seed = cfg["seed"] + i
        s = r.get("summary", {})
        rows.append([i, seed, r["status"]] + [s.get(c) for c in cols])
        if r["status"] != "ok":
            failures.append({"member": i, "seed": seed, "error": r["error"]})
    write_csv(out / "aggregate.csv", ["member", "seed", "status"] + cols, rows)
    write_json(out / "ensemble_summary.json", {"members": N, "base_seed": cfg["seed"], "failures": failures})
    return results, failures


def cmd_ensemble(args):
    cfg, base = _load_cfg(args)
    out = Path(args.out or cfg["output"])
    _, failures = run_ensemble(cfg, out, None if base is None else str(base))
    _say(args, f"{cfg['ensemble']} members, {len(failures)} failed; aggregate at {out / 'aggregate.csv'}")
    for f in failures:
        print(f"member {f['member']} (seed {f['seed']}): {f['error']}", file=sys.stderr)
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_schema(args):
    print(json.dumps(C.SCHEMA, indent=2))
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="sgm", description="Stochastic geometric mechanics toolkit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file or preset name")
    common.add_argument("--seed", type=int, help="override the base seed")
    common.add_argument("--out", help="output directory")
    common.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="single seeded run").set_defaults(func=cmd_run)
    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("suite")
    v.add_argument("--dt", help="comma-separated step sizes")
    v.add_argument("--T", type=float)
    v.add_argument("--case")
    v.add_argument("--kind", choices=["scalar", "one_form"])
    v.add_argument("--realization")
    v.add_argument("--n-samples", type=int)
    v.add_argument("--paths", type=int, help="number of Brownian paths (kiw)")
    v.set_defaults(func=cmd_verify)
    e = sub.add_parser("eof", parents=[common], help="EOF modes of a snapshot directory")
    e.add_argument("input")
    e.add_argument("K")
    e.add_argument("output", nargs="?")
    e.set_defaults(func=cmd_eof)
    sub.add_parser("ensemble", parents=[common], help="seeded ensemble").set_defaults(func=cmd_ensemble)
    sub.add_parser("schema", help="print the config JSON schema").set_defaults(func=cmd_schema)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.command == "eof":
        args.out = args.output or args.out
        if not args.out:
            print("error: eof needs an output directory", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except (
        UsageError, C.ConfigError, sgmf.SGMFError, E.EnsembleError, E.EOFRankError,
        F.FieldKindError, F.GridMismatchError,
    ) as exc:
        code = getattr(exc, "code", None)
        print(f"error{f' [{code}]' if code else ''}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
