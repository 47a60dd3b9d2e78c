"""Command-line front end: ``thetamm <subcommand> [config.json]``.

Exit codes: 0 success, 1 validation error, 2 numerical failure, 3 partial
results (some N points failed).
"""
import argparse
import json
import os
import sys
import time
from fractions import Fraction

import mpmath as mp

from .errors import ConfigError, ThetaMMError
from .experiments import (ExperimentConfig, background_independence, build_fg_table, jsonable,
                          resolve_eps, run_compare)
from .precision import resolve, to_mpc, working

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_PARTIAL = 0, 1, 2, 3


def _emit(obj, cfg=None, name=None):
    text = json.dumps(jsonable(obj), indent=2)
    out = None if cfg is None else cfg.output
    if out and name:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, name), "w") as fh:
            fh.write(text + "\n")
    print(text)


def _raw(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_curve(args):
    cfg = ExperimentConfig.load(args.config)
    from .spectral_curve import a_period_residuals, solve_curve
    eps = resolve_eps(cfg)
    with working(cfg.prec):
        curve = solve_curve(cfg.potential, eps, cfg.structure, cfg.eps_tot, cfg.prec)
        out = curve.to_dict()
        out["a_period_residual"] = mp.nstr(max(a_period_residuals(curve)), 5)
    _emit(out, cfg, "curve.json")
    return EXIT_OK


def cmd_fg(args):
    cfg = ExperimentConfig.load(args.config)
    eps = resolve_eps(cfg)
    table, fit = build_fg_table(cfg, eps)
    out = table.to_json()
    if fit is not None:
        out["fit"] = {k: [mp.nstr(v, 15), mp.nstr(fit.errors.get(k, 0), 3)] for k, v in fit.values.items()}
    _emit(out, cfg, "fg_table.json")
    return EXIT_OK


def cmd_theta(args):
    from .theta import theta_eval
    raw = _raw(args.config)
    prec = resolve(raw.get("prec"))
    with working(prec):
        # u is a list of entries and t a list of rows; entries are numbers or [re, im]
        u = [to_mpc(v) for v in raw.get("u", [0])]
        t = [[to_mpc(v) for v in row] for row in raw["t"]]
        jet = theta_eval(u, t, raw.get("a"), raw.get("b"), int(raw.get("m_max", 2)), prec)
        out = {"value": jet.value, "radius": jet.radius, "tail_bound": jet.tail_bound,
               "terms": jet.terms,
               "derivatives": {m: jet.d(m).to_json() for m in range(jet.m_max + 1)}}
    _emit(out)
    return EXIT_OK


def cmd_oracle(args):
    cfg = ExperimentConfig.load(args.config)
    from .oracle import Oracle
    eps = resolve_eps(cfg) if cfg.eps_star is not None else None
    rows = []
    ks = cfg.raw.get("virasoro_k", [-1, 0, 1, 2])
    with working(cfg.prec):
        for N in cfg.N:
            oracle = Oracle(cfg.potential, N, cfg.basis_paths, cfg.prec)
            scale, path = cfg.require_path().normalized()
            n = cfg.n_total(N)
            row = {"N": N, "n": n, "Z_full": oracle.full(path, n)}
            if eps is not None:
                row["Z_fixed"] = oracle.fixed_filling(cfg.counts(N, eps), radius="auto")
                row["ratio"] = row["Z_full"] / row["Z_fixed"]
            if n <= int(cfg.raw.get("virasoro_n_max", 6)):
                coeffs = {i: c for c, i in path.terms}
                row["virasoro"] = {k: oracle.virasoro(k, coeffs, n)[0] for k in ks}
            rows.append(row)
            print(f"N={N}: Z={mp.nstr(row['Z_full'], 15)}", file=sys.stderr)
    _emit(rows, cfg, "oracle.json")
    return EXIT_OK


def cmd_expand(args):
    cfg = ExperimentConfig.load(args.config)
    from .expansion import assemble_ratio
    eps = resolve_eps(cfg)
    table, _ = build_fg_table(cfg, eps)
    out = [assemble_ratio(table, N, cfg.p_max, nu=cfg.nu(), prec=cfg.prec).to_json() for N in cfg.N]
    _emit(out, cfg, "expand.json")
    return EXIT_OK


def cmd_resum(args):
    cfg = ExperimentConfig.load(args.config)
    from .resummation import round_trip_residuals, solve_corrections
    eps = resolve_eps(cfg)
    q_max = cfg.q_max or 1
    table, _ = build_fg_table(cfg, eps, 2 * q_max)
    out = []
    for N in cfg.N:
        corr = solve_corrections(table, None, q_max, N, cfg.nu(), prec=cfg.prec)
        item = corr.to_json()
        item["N"] = N
        item["round_trip"] = [mp.nstr(r, 5) for r in round_trip_residuals(corr, prec=cfg.prec)]
        out.append(item)
    _emit(out, cfg, "resum.json")
    return EXIT_OK


def cmd_holan(args):
    from .holan import diagram_weights, enumerate_pairings, gaussian_moment_identity, structure_match
    raw = _raw(args.config) if args.config else {}
    p_max = int(raw.get("p_max", 4))
    ranks_list = raw.get("ranks", [[4], [3, 3], [2, 2], [1, 3], [2, 1, 1]])
    out = {"pairings": [], "gaussian": [], "diagram_weights_g2": [], "structure": None}
    for ranks in ranks_list:
        e = enumerate_pairings(ranks)
        out["pairings"].append({"ranks": ranks, "odd": e.odd, "total": e.total,
                                "orbits": [[list(map(list, s.pattern)), s.multiplicity] for s in e]})
    kappa = [[Fraction(x) for x in row] for row in raw.get("kappa", [["1/2", "1/3"], ["1/3", "2"]])]
    ok = True
    for l in range(1, 5):
        lhs, rhs = gaussian_moment_identity(kappa, l)
        out["gaussian"].append({"l": l, "exact_match": lhs == rhs})
        ok &= lhs == rhs
    out["diagram_weights_g2"] = [[list(map(list, t)), list(map(list, pat)), str(w)]
                                 for t, pat, w in diagram_weights(2)]
    rep = structure_match(p_max)
    out["structure"] = {"ok": rep.ok, "rows": [{k: (str(v) if k == "odd_theta_terms" else v)
                                                  for k, v in r.items()} for r in rep.rows]}
    _emit(out)
    return EXIT_OK if ok and rep.ok else EXIT_NUMERICAL


def cmd_boutroux(args):
    cfg = ExperimentConfig.load(args.config)
    from .spectral_curve import boutroux_find
    with working(cfg.prec):
        eps, curve, hist = boutroux_find(cfg.potential, cfg.structure, cfg.eps_tot, prec=cfg.prec)
        g = curve.gbar
        pi_im_tau = mp.matrix([[mp.pi * mp.im(curve.tau[i, j]) for j in range(g)] for i in range(g)])
        out = {"eps_star": eps, "re_F0_prime": [mp.re(v) for v in curve.f0p],
               "pi_im_tau_eigenvalues": list(mp.eigsy(pi_im_tau)[0]),
               "iterations": [[h[0], h[1]] for h in hist], "curve": curve.to_dict()}
        bg = cfg.raw.get("background")
        if bg:
            out["background"] = background_independence(cfg, bg["eps"], int(bg["N"]),
                                                         int(bg.get("p_max", 1)))
    _emit(out, cfg, "boutroux.json")
    return EXIT_OK


def cmd_compare(args):
    cfg = ExperimentConfig.load(args.config)
    t0 = time.time()
    rep = run_compare(cfg, log=lambda s: print(s, file=sys.stderr))
    summary = {k: v for k, v in rep.items() if k != "rows"}
    summary["errors"] = [[r["N"], r.get("rel_err", r.get("error"))] for r in rep["rows"]]
    summary["seconds"] = round(time.time() - t0, 1)
    _emit(summary)
    return EXIT_PARTIAL if rep["partial"] else EXIT_OK


def cmd_selftest(args):
    from .selftest import run_selftest
    results = run_selftest(prec=resolve(args.prec), fault=args.inject_fault)
    width = max(len(r[0]) for r in results)
    for name, status, detail in results:
        print(f"{name:<{width}}  {status:<4}  {detail}")
    return EXIT_NUMERICAL if any(s == "FAIL" for _, s, _ in results) else EXIT_OK


COMMANDS = {
    "curve": (cmd_curve, "solve the spectral curve at eps* (or the Boutroux point)"),
    "fg": (cmd_fg, "build the table of F_h^(l) at eps*"),
    "theta": (cmd_theta, "evaluate Theta and its u-derivatives at a point"),
    "oracle": (cmd_oracle, "exact partition functions and Virasoro residuals"),
    "expand": (cmd_expand, "partial sums S_0..S_p of the ratio prediction"),
    "resum": (cmd_resum, "resummation shifts u^(k), t^(j) and round-trip residuals"),
    "holan-check": (cmd_holan, "pairing tables and Wick identity checks"),
    "boutroux": (cmd_boutroux, "find the Boutroux point (and background independence)"),
    "compare": (cmd_compare, "oracle ratio versus predictions over an N sweep"),
    "selftest": (cmd_selftest, "run the invariant suite"),
}


def build_parser():
    parser = argparse.ArgumentParser(prog="thetamm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext)
        if name == "selftest":
            p.add_argument("--prec", type=int, default=None)
            p.add_argument("--inject-fault", choices=["weights"], default=None,
                           help="corrupt a weight table to check that the suite notices")
        else:
            p.add_argument("config", nargs="?" if name == "holan-check" else None,
                           help="experiment config (JSON)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    func = COMMANDS[args.command][0]
    try:
        return func(args)
    except (ConfigError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"validation error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ThetaMMError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
