"""Command-line interface: scenario ingestion, batch solving, sweeps, export.

Scenario files are JSON with a versioned schema (see ``parse_scenario``).
Subcommands:

* solve      solve one scenario, write a full JSON report
* sweep      grid sweep over scenario parameters, write a CSV table
* certify    re-verify the certificate stored in a report
* public     best public signal and its global-optimality check
* closedform analytic solution and SDP cross-check where available
* sample     Monte Carlo obedience oracle on a solved scenario

Exit code 0 only when every requested verification passes.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import closedform, designsdp, envmodel, structure, symmetry

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    def __init__(self, field, msg):
        super().__init__(f"scenario field '{field}': {msg}")
        self.field = field


def _mat(obj, field):
    try:
        M = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as e:
        raise ScenarioError(field, f"not a numeric array: {e}")
    return M


def _network_from_spec(spec):
    kind = spec.get("kind", "custom")
    n = spec.get("n")
    if kind == "complete":
        G = envmodel.complete_adjacency(n)
    elif kind == "cycle":
        G = envmodel.cycle_adjacency(n)
    elif kind == "star":
        G = envmodel.star_adjacency(n)
    elif kind == "custom":
        G = _mat(spec["adjacency"], "environment.network.adjacency")
        n = G.shape[0]
    else:
        raise ScenarioError("environment.network.kind", f"unknown kind {kind!r}")
    return envmodel.NetworkSpec(n=n, G=G, beta=float(spec["beta"]))


def parse_scenario(doc):
    """Resolve a scenario document into (name, Environment, analysis flags,
    tolerance overrides, context)."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ScenarioError("schema_version",
                            f"expected {SCHEMA_VERSION}, got {doc.get('schema_version')}")
    name = doc.get("name", "scenario")
    env_spec = doc.get("environment", {})
    state = doc.get("state", {})
    objective = doc.get("objective", {})

    ctx = {"beta": None, "rho": None, "net": None}

    if "network" in env_spec:
        net = _network_from_spec(env_spec["network"])
        ctx["net"] = net
        ctx["beta"] = net.beta
        n = net.n
        m = n
        Q = np.eye(n) - net.beta * net.G
        R = np.eye(n)
    elif "Q" in env_spec:
        Q = _mat(env_spec["Q"], "environment.Q")
        R = _mat(env_spec.get("R", np.eye(Q.shape[0])), "environment.R")
        n = Q.shape[0]
        m = R.shape[1] if R.ndim == 2 else 1
    else:
        raise ScenarioError("environment", "needs 'network' or explicit 'Q'")

    skind = state.get("kind", "explicit")
    if skind == "common":
        Z = np.ones((m, m))
        ctx["rho"] = 1.0
    elif skind == "equicorrelated":
        rho = float(state["rho"])
        Z = envmodel.equicorrelated_Z(m, rho)
        ctx["rho"] = rho
    elif skind == "explicit":
        Z = _mat(state["Z"], "state.Z")
    else:
        raise ScenarioError("state.kind", f"unknown kind {skind!r}")
    theta_mean = _mat(state.get("theta_mean", np.zeros(m)), "state.theta_mean")

    if "welfare_weights" in objective:
        base = envmodel.make_environment(Q, R, np.zeros((n, n)),
                                         np.zeros((n, m)), Z, theta_mean)
        env = envmodel.welfare_environment(base, objective["welfare_weights"])
    elif "V" in objective:
        V = _mat(objective["V"], "objective.V")
        W = _mat(objective.get("W", np.zeros((n, m))), "objective.W")
        env = envmodel.make_environment(Q, R, V, W, Z, theta_mean)
    else:
        raise ScenarioError("objective", "needs 'welfare_weights' or explicit 'V'")

    analysis = doc.get("analysis", {})
    tols = doc.get("tolerances", {})
    return name, env, analysis, tols, ctx


def _classify_regime(env, point, tol=1e-6):
    scale = 1.0 + float(np.linalg.norm(env.Z))
    if np.linalg.norm(point.X) <= tol * scale:
        return "NoDisclosure"
    fd = designsdp.full_disclosure_point(env)
    if (np.linalg.norm(point.X - fd.X) <= tol * (1.0 + np.linalg.norm(fd.X))
            and np.linalg.norm(point.Y - fd.Y) <= tol * (1.0 + np.linalg.norm(fd.Y))):
        return "FullDisclosure"
    return "Partial"


def run_solve(doc, seed=None, tol_gap=None, tol_feas=None):
    """Solve one scenario document, returning a plain-dict report."""
    name, env, analysis, tols, ctx = parse_scenario(doc)
    gap_tol = tol_gap if tol_gap is not None else tols.get("gap", 1e-8)
    feas_tol = tol_feas if tol_feas is not None else tols.get("feas", 1e-8)
    point, cert, report, v_p = designsdp.solve_design(env, gap_tol=gap_tol,
                                                      feas_tol=feas_tol)
    lam = cert.lam
    if analysis.get("symmetrize") and ctx["net"] is not None:
        try:
            grp = symmetry.automorphisms(ctx["net"].G)
            point = symmetry.symmetrize(point, grp, env)
            lam = symmetry.symmetrize(lam, grp)
            # re-verify in reduced state coordinates when Z is singular,
            # which is where the dual certificate is attained
            env_r, F = designsdp.reduce_state(env)
            if F is None:
                point_r = point
            else:
                point_r = designsdp.PrimalPoint(
                    X=point.X, Y=point.Y @ np.linalg.pinv(F).T)
            cert = designsdp.certificate(env_r, lam, tol=1e-7)
            report = designsdp.verify_optimality(env_r, point_r, cert)
        except symmetry.EnvironmentNotInvariant:
            pass

    out = {
        "schema_version": SCHEMA_VERSION,
        "name": name,
        "scenario": doc,
        "v_p": v_p,
        "v_d": cert.dual_value,
        "gap": abs(v_p - cert.dual_value),
        "X": point.X.tolist(),
        "Y": point.Y.tolist(),
        "lambda": np.asarray(lam).tolist(),
        "cs1_residual": report.cs1_residual,
        "cs2_residual": report.cs2_residual,
        "certified": bool(report.verdict),
        "regime": _classify_regime(env, point),
    }

    ok = bool(report.verdict)
    if analysis.get("metrics", True) and env.m == env.n:
        gis = structure.from_primal(env, point)
        met = structure.metrics(gis)
        nf = structure.noise_freeness(gis)
        si = structure.state_identifiability(gis)
        out["s"] = met.s.tolist()
        out["S"] = met.S.tolist()
        out["N"] = met.N.tolist()
        out["noise_free"] = nf["is_noise_free"]
        out["state_identifiable"] = si["is_identifiable"]
    if analysis.get("public"):
        pub = closedform.public_design(env)
        glob = closedform.public_globally_optimal(env, pub)
        out["public"] = {
            "k_star": pub.k_star,
            "value": pub.value,
            "globally_optimal": glob["verdict"],
            "residual": glob["residual"],
        }
    if analysis.get("monte_carlo"):
        mc = analysis["monte_carlo"]
        gis = structure.from_primal(env, point)
        res = structure.mc_obedience(env, gis, int(mc.get("count", 100_000)),
                                     int(seed if seed is not None
                                         else mc.get("seed", 0)))
        out["monte_carlo"] = res
        ok = ok and res["ok"]
    out["ok"] = ok
    return out


def _set_path(doc, path, value):
    parts = path.split(".")
    node = doc
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value


def run_sweep(spec, jobs=1, tol_gap=None, tol_feas=None):
    """Evaluate a scenario template over a parameter grid.

    Returns (rows, fieldnames); per-row failures are recorded in the row and
    the sweep continues.
    """
    template = spec["template"]
    axes = spec["axes"]
    grids = [ax["grid"] for ax in axes]
    paths = [ax["path"] for ax in axes]

    combos = [[]]
    for g in grids:
        combos = [c + [v] for c in combos for v in g]

    def one(values):
        doc = json.loads(json.dumps(template))
        for path, v in zip(paths, values):
            _set_path(doc, path, v)
        try:
            rep = run_solve(doc, tol_gap=tol_gap, tol_feas=tol_feas)
            return values, rep, None
        except Exception as e:  # per-row failure, sweep continues
            return values, None, str(e)

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(one, combos))
    else:
        results = [one(c) for c in combos]

    rows = []
    n_agents = 0
    for values, rep, err in results:
        row = {}
        for path, v in zip(paths, values):
            key = path.split(".")[-1]
            row[key] = v
        if err is not None:
            row.update({"scenario": template.get("name", "scenario"),
                        "error": err})
            rows.append(row)
            continue
        _, _, _, _, ctx = parse_scenario(rep["scenario"])
        row.update({
            "scenario": rep["name"],
            "beta": ctx["beta"] if ctx["beta"] is not None else row.get("beta"),
            "rho": ctx["rho"] if ctx["rho"] is not None else row.get("rho"),
            "v_p": rep["v_p"],
            "gap": rep["gap"],
            "regime": rep["regime"],
            "error": "",
        })
        if "s" in rep:
            n_agents = max(n_agents, len(rep["s"]))
            for i, v in enumerate(rep["s"]):
                row[f"s_{i + 1}"] = v
            for i, v in enumerate(rep["S"]):
                row[f"S_{i + 1}"] = v
            for i, v in enumerate(rep["N"]):
                row[f"N_{i + 1}"] = v
        rows.append(row)

    fields = ["scenario", "beta", "rho", "v_p", "gap"]
    fields += [f"s_{i + 1}" for i in range(n_agents)]
    fields += [f"S_{i + 1}" for i in range(n_agents)]
    fields += [f"N_{i + 1}" for i in range(n_agents)]
    fields += ["regime", "error"]
    extra = sorted({k for r in rows for k in r} - set(fields))
    return rows, fields + extra


def dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def write_csv(rows, fields, path: Path):
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, restval="")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def _load(path):
    with open(path) as fh:
        return json.load(fh)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="lqgid")
    sub = ap.add_subparsers(dest="cmd", required=True)
    for cmd in ("solve", "sweep", "certify", "public", "closedform", "sample"):
        sp = sub.add_parser(cmd)
        sp.add_argument("--scenario", required=True)
        sp.add_argument("--out", default=".")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol-gap", type=float, default=None)
        sp.add_argument("--tol-feas", type=float, default=None)
        sp.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args(argv)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = _load(args.scenario)

    try:
        if args.cmd == "solve":
            rep = run_solve(doc, seed=args.seed, tol_gap=args.tol_gap,
                            tol_feas=args.tol_feas)
            dump_json(rep, out_dir / f"{rep['name']}.report.json")
            return 0 if rep["ok"] else 1

        if args.cmd == "sweep":
            rows, fields = run_sweep(doc, jobs=args.jobs, tol_gap=args.tol_gap,
                                     tol_feas=args.tol_feas)
            name = doc.get("template", {}).get("name", "sweep")
            write_csv(rows, fields, out_dir / f"{name}.sweep.csv")
            return 0 if all(not r.get("error") for r in rows) else 1

        if args.cmd == "certify":
            # doc is a stored report; re-verify its certificate
            name, env, _, _, _ = parse_scenario(doc["scenario"])
            point = designsdp.PrimalPoint(X=np.asarray(doc["X"]),
                                          Y=np.asarray(doc["Y"]))
            cert = designsdp.certificate(env, np.asarray(doc["lambda"]),
                                         tol=1e-7)
            rep = designsdp.verify_optimality(env, point, cert)
            dump_json({"verdict": bool(rep.verdict),
                       "cs1_residual": rep.cs1_residual,
                       "cs2_residual": rep.cs2_residual,
                       "gap": rep.gap}, out_dir / f"{name}.certify.json")
            return 0 if rep.verdict else 1

        if args.cmd == "public":
            name, env, _, _, _ = parse_scenario(doc)
            pub = closedform.public_design(env)
            glob = closedform.public_globally_optimal(env, pub)
            dump_json({"k_star": pub.k_star, "value": pub.value,
                       "S": pub.S.tolist(),
                       "signal_map": pub.signal_map.tolist(),
                       "globally_optimal": glob["verdict"],
                       "residual": glob["residual"]},
                      out_dir / f"{name}.public.json")
            return 0

        if args.cmd == "closedform":
            name, env, _, _, ctx = parse_scenario(doc)
            rep = run_solve(doc)
            result = {"v_p": rep["v_p"]}
            ok = rep["ok"]
            net = ctx["net"]
            if net is not None and ctx["rho"] == 1.0:
                try:
                    cf = closedform.transitive_welfare(net.G, net.beta)
                    result["closed_form"] = {
                        "full_disclosure_optimal": cf.full_disclosure_optimal,
                        "cutoff": cf.cutoff, "s_i": cf.s_i, "lambda": cf.lam,
                    }
                    if "s" in rep:
                        ok = ok and abs(rep["s"][0] - cf.s_i) <= 1e-5
                except (closedform.NotTransitive, ValueError):
                    pass
            dump_json({"name": name, "ok": ok, **result},
                      out_dir / f"{name}.closedform.json")
            return 0 if ok else 1

        if args.cmd == "sample":
            name, env, analysis, _, _ = parse_scenario(doc)
            point, _, _, _ = designsdp.solve_design(env)
            gis = structure.from_primal(env, point)
            mc = analysis.get("monte_carlo", {})
            res = structure.mc_obedience(env, gis,
                                         int(mc.get("count", 1_000_000)),
                                         args.seed or int(mc.get("seed", 0)))
            dump_json({"name": name, **res}, out_dir / f"{name}.sample.json")
            return 0 if res["ok"] else 1
    except (ScenarioError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
