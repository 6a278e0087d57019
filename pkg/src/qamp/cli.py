"""Command-line runner: ``qamp <command> [options]``.

Exit status: 0 when every check passes, 1 on a bound violation, 2 on a configuration
error (bad arguments, unreadable or malformed input), 3 when a size cap is exceeded.
A report is written for every command except ``gen``, which writes the generated
instance or graph instead.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import replace

import numpy as np

from . import amp, corpus, detect, linalg, qsat, sweep, walks, xy
from .errors import (
    AllProjectedOut,
    DimensionTooLarge,
    EnumerationTooLarge,
    InexactTheta,
    NoConvergence,
    ParseError,
    QampError,
)

SCHEMA = "qamp-report/1"
EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None, tuples to lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def build_report(args, params, checks, rows, error=None, elapsed=None):
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out", "format", "timing")}
    report = {
        "schema": SCHEMA,
        "command": args.command,
        "config": config,
        "params": params,
        "checks": [c.to_dict() for c in checks],
        "rows": rows,
        "passed": error is None and all(c.passed for c in checks),
    }
    if error is not None:
        report["error"] = error
    if elapsed is not None:
        report["wall_time"] = elapsed
    return _clean(report)


def render_csv(report):
    rows = report["rows"] or [
        {k: c[k] for k in ("check", "trials", "worst_margin", "passed")} | {"failures": len(c["failures"])}
        for c in report["checks"]
    ]
    columns = []
    for row in rows:
        for k in row:
            if k not in columns:
                columns.append(k)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, (dict, list)) else v for k, v in row.items()})
    return buf.getvalue()


def emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def write_report(report, args):
    if args.format == "csv":
        emit(render_csv(report), args.out)
    else:
        emit(json.dumps(report, indent=2, sort_keys=False) + "\n", args.out)


# -- inputs --------------------------------------------------------------------------


def load_system(path):
    try:
        sys_ = qsat.read_instance(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such file: {path}") from exc
    return sys_ if sys_.layers is not None else sys_.with_layers()


def load_graph(spec):
    try:
        return walks.named_graph(spec)
    except ValueError:
        pass
    try:
        return walks.read_graph(spec)
    except FileNotFoundError as exc:
        raise ConfigError(f"{spec!r} is neither a graph name nor a readable file") from exc


def _params(sys_, args, ell=0):
    return detect.system_params(sys_, ell, args.theta_mode, _theta_cap(args), args.seed, dense_cap=args.cap_dense)


def _theta_cap(args):
    return args.cap_enum or xy.THETA_CAP


def _walk_cap(args):
    return args.cap_enum or walks.ENUM_CAP


def _param_dict(info):
    return {**info.params.to_dict(), "f1": info.f1}


# -- commands ------------------------------------------------------------------------


def cmd_gen(args):
    fam = args.family
    rng = corpus.rng_for(args.seed, 0)
    if fam == "random-regular":
        if args.n is None:
            raise ConfigError("random-regular needs --n")
        g = walks.random_regular(args.n, args.d, args.seed)
        text = json.dumps(g.to_dict()) + "\n"
    else:
        if fam == "angle":
            sys_ = corpus.angle_system(args.angle)
        elif fam == "saturated":
            if args.n is None:
                raise ConfigError("saturated needs --n")
            sys_ = corpus.saturated_system(args.n, args.stack)
        else:
            if args.graph is None:
                raise ConfigError(f"family {fam} needs --graph")
            graph = load_graph(args.graph)
            if fam == "random-rank":
                sys_ = corpus.random_edge_system(graph, args.rank, rng, args.q, name=f"{graph.name}-rank{args.rank}")
            else:
                try:
                    proj = corpus.quantum_family(fam, args.q, args.angle)
                except ValueError as exc:
                    raise ConfigError(str(exc)) from exc
                sys_ = amp.edge_system(graph, proj, args.q, name=f"{graph.name}-{fam}")
        text = qsat.save_instance(sys_).decode() + "\n"
    emit(text, args.out)
    return None


def cmd_validate(args):
    sys_ = qsat.read_instance(args.instance)
    problems = qsat.validate(sys_)
    rep = detect.CheckReport("validate", {"n": sys_.n, "constraints": sys_.M})
    rep.trials = 1
    for p in problems:
        rep.failures.append({"where": p})
    return {"n": sys_.n, "constraints": sys_.M, "layers_given": sys_.layers is not None}, [rep], [{"problem": p} for p in problems]


def cmd_layers(args):
    sys_ = load_system(args.instance)
    rows = [{"layer": i, "constraints": list(layer)} for i, layer in enumerate(sys_.layers)]
    return {"g": sys_.g, "k": sys_.k}, [], rows


def cmd_theta(args):
    sys_ = load_system(args.instance)
    info = _params(sys_, args)
    prep = sweep.Prepared(0, sys_, info)
    return _param_dict(info), [], sweep.theta_summary(prep)


def cmd_ground(args):
    sys_ = load_system(args.instance)
    rows = []
    rep = detect.CheckReport("ground")
    if args.method in ("dense", "both"):
        rows.append({"method": "dense", "epsilon0": qsat.ground_energy(sys_, "dense", cap=args.cap_dense)})
    if args.method in ("lanczos", "both"):
        rows.append({"method": "lanczos", "epsilon0": qsat.ground_energy(sys_, "lanczos", tol=args.tol, seed=args.seed)})
    if args.method == "auto":
        rows.append({"method": "auto", "epsilon0": qsat.ground_energy(sys_, cap=args.cap_dense)})
    if len(rows) == 2:
        rep.trials = 1
        rep.record(abs(rows[0]["epsilon0"] - rows[1]["epsilon0"]), 0.0, "lanczos vs dense", slack=1e-8)
    return {"dim": sys_.dim, "epsilon0": rows[0]["epsilon0"]}, [rep] if rep.trials else [], rows


def cmd_decay(args):
    sys_ = load_system(args.instance)
    info = _params(sys_, args)
    psis = corpus.haar_states(sys_.dim, args.trials, args.seed)
    dec_rep = detect.CheckReport("decay", {"ell": args.ell})
    en_rep = detect.CheckReport("energy", {"ell": args.ell})
    rows = []
    for di, dec in enumerate(info.decompositions()):
        dp = detect.decomposition_params(sys_, dec, args.ell)
        for ti, psi in enumerate(psis):
            try:
                spec = detect.decay_spectrum(sys_, dec, args.ell, psi)
            except AllProjectedOut:
                dec_rep.skipped += 1
                continue
            try:
                detect.verify_decay(spec, dp, dec_rep)
                if sys_.dim <= args.cap_dense:
                    detect.verify_energy_claims(sys_, dec, args.ell, psi, en_rep, args.cap_dense, spectrum=spec)
            except InexactTheta:
                dec_rep.report_only = en_rep.report_only = True
            rows.append(
                {
                    "decomposition": di,
                    "layer_order": list(dec.layer_order),
                    "trial": ti,
                    "x": spec.x,
                    "lambda_s": spec.lambda_s.tolist(),
                    "eta_s": spec.eta_s.tolist(),
                }
            )
    return _param_dict(info), [dec_rep, en_rep], rows


def cmd_detect(args):
    sys_ = load_system(args.instance)
    info = _params(sys_, args)
    p = replace(info.params, ell=args.ell)
    psis = corpus.haar_states(sys_.dim, args.trials, args.seed)
    aux = detect.verify_aux(sys_, p, psis)
    det = detect._report_for("detect", p)
    rows = []
    for i, psi in enumerate(psis):
        layer, _ = detect.verify_detectability(sys_, p, psi, det)
        rows.append({"trial": i, "witness_layer": layer})
    params = _param_dict(info)
    params["ell"] = args.ell
    params["regime_valid"] = p.regime_valid()
    if p.regime_valid():
        params["delta_sq"] = detect.delta_sq(p)
    return params, [aux, det], rows


def cmd_kitaev(args):
    sys_ = load_system(args.instance)
    info = _params(sys_, args)
    rep = detect.kitaev_check(sys_, info.params, args.cap_dense)
    return _param_dict(info), [rep], []


def cmd_camp(args):
    graph = load_graph(args.graph)
    if args.family == "neq":
        csp = amp.inequality_csp(graph, args.q)
    else:
        csp = amp.random_csp(graph, args.q, 0.6, corpus.rng_for(args.seed, 1))
    sigmas = corpus.assignments(csp, args.trials, args.seed)
    rep = amp.verify_classical_amp(csp, sigmas, range(1, args.t + 1))
    spec = walks.spectral(graph)
    return {"graph": graph.name, "n": graph.n, "d": graph.degree, "lambda": spec.lam, "c": amp.c_of_lambda(spec.lam)}, [rep], rep.rows


def cmd_moments(args):
    graph = load_graph(args.graph)
    rng = corpus.rng_for(args.seed, 0)
    rep = detect.CheckReport("moments")
    for _ in range(args.trials):
        mask = rng.random(len(graph.edges)) < rng.uniform(0.05, 0.5)
        bad = [e for e, m in zip(graph.edges, mask) if m]
        for t in range(1, args.t + 1):
            amp.verify_moments(graph, bad, t, rep, _walk_cap(args))
    return {"graph": graph.name, "lambda": walks.spectral(graph).lam}, [rep], rep.rows


def _experiment(args):
    if args.experiment:
        try:
            with open(args.experiment) as fh:
                spec = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"no such file: {args.experiment}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
        if not isinstance(spec, dict):
            raise ParseError("experiment must be an object", "$")
        graph = spec.get("graph", "k4")
        graph = walks.graph_from_dict(graph) if isinstance(graph, dict) else load_graph(str(graph))
        return graph, spec.get("family", "diagonal-neq"), int(spec.get("q", 2)), int(spec.get("t", args.t)), spec.get("instance")
    if args.graph is None:
        raise ConfigError("qamp needs an experiment file or --graph")
    return load_graph(args.graph), args.family, args.q, args.t, args.instance


def cmd_qamp(args):
    graph, family, q, t, instance = _experiment(args)
    if family == "file":
        if not instance:
            raise ConfigError("family 'file' needs an instance path")
        base = load_system(instance)
    else:
        try:
            proj = corpus.quantum_family(family, q)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        base = amp.edge_system(graph, proj, q, name=f"{graph.name}-{family}")
    qws = amp.QuantumWalkSystem(graph, base)
    info = detect.system_params(base, 0, args.theta_mode, _theta_cap(args), args.seed, dense_cap=args.cap_dense)
    if not info.params.theta_exact:
        raise DimensionTooLarge("theta could not be enumerated exactly within --cap-enum")
    rep = amp.verify_quantum_amp(qws, range(1, t + 1), info.params, cap_dense=args.cap_dense, cap_enum=_walk_cap(args))
    return rep.params, [rep], rep.rows


def cmd_verify_all(args):
    if args.corpus != "standard":
        raise ConfigError(f"unknown corpus {args.corpus!r}")
    reports, summary = sweep.verify_all(args.seed, args.trials, max(1, min(args.trials, 20)))
    return {"corpus": args.corpus, "instances": len(summary)}, reports, summary


COMMANDS = {
    "gen": cmd_gen,
    "validate": cmd_validate,
    "layers": cmd_layers,
    "theta": cmd_theta,
    "ground": cmd_ground,
    "decay": cmd_decay,
    "detect": cmd_detect,
    "kitaev": cmd_kitaev,
    "camp": cmd_camp,
    "qamp": cmd_qamp,
    "moments": cmd_moments,
    "verify-all": cmd_verify_all,
}


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output path (stdout when omitted)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=100)
    common.add_argument("--t", type=int, default=3, help="largest walk length")
    common.add_argument("--ell", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--cap-enum", type=int, default=None, help="enumeration cap: theta products (default 1e7) and walks (default 1e6)")
    common.add_argument("--cap-dense", type=int, default=linalg.DENSE_CAP, help="largest dense matrix dimension")
    common.add_argument("--theta-mode", choices=("exact", "sampled"), default="exact")
    common.add_argument("--timing", action="store_true", help="add wall time to the report")

    parser = argparse.ArgumentParser(prog="qamp", description="Detectability and gap amplification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", parents=[common], help="generate an instance or graph")
    p.add_argument("--family", required=True, choices=(
        "angle", "random-rank", "saturated", "diagonal-neq", "rank1-entangled", "rank3-entangled", "random-regular"))
    p.add_argument("--graph", help="graph name (k4, prism, cycleN, pathN, kN) or file")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--angle", type=float, default=corpus.ENTANGLED_ANGLE)
    p.add_argument("--stack", type=int, default=1)

    instance_help = {
        "validate": "check projectors, supports and layers of an instance",
        "layers": "show the layer partition",
        "theta": "pyramids, XY decompositions and theta",
        "decay": "sector weight decay and sector energies",
        "detect": "detectability of violations in some layer",
        "kitaev": "two-layer angle chain",
    }
    for name, text in instance_help.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("instance")
    p = sub.add_parser("ground", parents=[common], help="ground energy, dense and Lanczos")
    p.add_argument("instance")
    p.add_argument("--method", choices=("auto", "dense", "lanczos", "both"), default="both")

    p = sub.add_parser("camp", parents=[common], help="classical amplification on a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--q", type=int, default=2, help="alphabet size")
    p.add_argument("--family", choices=("neq", "random"), default="neq")
    p = sub.add_parser("moments", parents=[common], help="walk moment bounds on random bad-edge sets")
    p.add_argument("--graph", required=True)
    p = sub.add_parser("qamp", parents=[common], help="quantum amplification on a small edge system")
    p.add_argument("experiment", nargs="?", help="experiment JSON file")
    p.add_argument("--graph")
    p.add_argument("--family", choices=("diagonal-neq", "rank1-entangled", "rank3-entangled", "file"), default="diagonal-neq")
    p.add_argument("--q", type=int, default=2)
    p.add_argument("--instance", help="instance file for family 'file'")
    p = sub.add_parser("verify-all", parents=[common], help="every check over the pinned corpus")
    p.add_argument("--corpus", default="standard")
    return parser


def run(argv=None):
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.trials < 1 or args.t < 1 or args.ell < 0:
        parser.print_usage(sys.stderr)
        sys.stderr.write("qamp: --trials and --t must be positive, --ell non-negative\n")
        return EXIT_CONFIG
    start = time.perf_counter()
    error, code = None, EXIT_OK
    params, checks, rows = {}, [], []
    try:
        result = COMMANDS[args.command](args)
        if result is None:
            return EXIT_OK
        params, checks, rows = result
    except (DimensionTooLarge, EnumerationTooLarge, NoConvergence) as exc:
        error, code = {"type": type(exc).__name__, "message": str(exc)}, EXIT_CAP
    except (ConfigError, ParseError, QampError, ValueError, OSError) as exc:
        error, code = {"type": type(exc).__name__, "message": str(exc)}, EXIT_CONFIG
    if args.command == "gen":
        sys.stderr.write(f"qamp gen: {error['message']}\n")
        return code
    elapsed = time.perf_counter() - start if args.timing else None
    report = build_report(args, params, checks, rows, error, elapsed)
    write_report(report, args)
    if error is not None:
        sys.stderr.write(f"qamp {args.command}: {error['type']}: {error['message']}\n")
        return code
    return EXIT_OK if report["passed"] else EXIT_FAIL


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
