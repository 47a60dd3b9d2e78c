"""Experiment configuration and orchestration behind the command line.

A config is a JSON object; the fields are documented on
:class:`ExperimentConfig`.  :func:`run_compare` sweeps N, evaluates the
oracle ratio ``Zhat(gamma) / Z(n*)`` and the predictions ``S_0..S_p``
(and the resummed theta value when ``q_max`` is set), and fits log-log
error slopes.
"""
import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import mpmath as mp

from .contour import BasisPath, GeneralizedPath, Potential, default_basis
from .errors import ConfigError, ThetaMMError
from .expansion import assemble_ratio
from .invariants import FgTable, curve_table, fit_from_oracle
from .oracle import FillingCounts, Oracle
from .precision import resolve, to_mpc, working
from .resummation import eval_resummed, solve_corrections
from .spectral_curve import CutStructure, boutroux_find, default_cut_structure, solve_curve

INTEGRALITY_TOL = 1e-9


def _mpf(x):
    return mp.mpf(repr(x)) if isinstance(x, float) else mp.mpf(x)


@dataclass
class ExperimentConfig:
    """Validated experiment settings.

    JSON fields: ``potential`` (coefficients t_1..t_{d+1}), ``basis``
    (optional list of ``{id, angle_in, angle_out, vertex}``), ``path``
    (``{basis_id: c}``), ``cuts`` (anchors), ``cut_ids`` (basis id carrying
    each cut, default the path ids in order), ``eps_star`` (list or
    ``"boutroux"``), ``eps_tot``, ``N`` (list), ``p_max``, ``q_max``,
    ``prec``, ``fit`` (``{N, deltas, depth}`` to take F1' from the oracle
    fit), ``fg_table`` (external table file), ``workers``, ``output``.
    """

    potential: Potential
    path: GeneralizedPath = None
    basis: dict = None
    cuts: CutStructure = None
    cut_ids: list = None
    eps_star: object = None
    eps_tot: object = 1
    N: list = field(default_factory=list)
    p_max: int = 1
    q_max: int = None
    prec: int = None
    fit: dict = None
    fg_table: str = None
    workers: int = 1
    output: str = None
    ratio_mode: bool = True
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw):
        # decimal inputs such as 0.1 must be read at the working precision
        with working(resolve(raw.get("prec"))):
            return cls._from_dict(raw)

    @classmethod
    def _from_dict(cls, raw):
        if "potential" not in raw:
            raise ConfigError("config needs a 'potential'")
        pot = Potential.from_config(raw["potential"])
        basis = None
        if raw.get("basis"):
            basis = {int(b["id"]): BasisPath.two_rays(int(b["id"]), _mpf(b["angle_in"]),
                                                     _mpf(b["angle_out"]), to_mpc(b.get("vertex", 0)))
                     for b in raw["basis"]}
            for b in basis.values():
                b.check_convergent(pot)
        path = None
        if raw.get("path") is not None:
            coeffs = raw["path"]
            if isinstance(coeffs, dict):
                coeffs = {int(k): v for k, v in coeffs.items()}
            path = GeneralizedPath.from_coefficients(coeffs)
        eps = raw.get("eps_star")
        if eps is not None and eps != "boutroux":
            eps = [_mpf(e) for e in (eps if isinstance(eps, list) else [eps])]
        p_max = int(raw.get("p_max", 1))
        q_max = raw.get("q_max")
        q_max = None if q_max is None else int(q_max)
        if q_max is not None and p_max > 2 * q_max:
            raise ConfigError(f"p_max = {p_max} exceeds 2 q_max = {2 * q_max}")
        Ns = [int(n) for n in raw.get("N", [])]
        if any(n <= 0 for n in Ns):
            raise ConfigError("N values must be positive")
        cfg = cls(potential=pot, path=path, basis=basis,
                  cuts=CutStructure.from_config(raw.get("cuts")),
                  cut_ids=raw.get("cut_ids"), eps_star=eps,
                  eps_tot=_mpf(raw.get("eps_tot", 1)), N=Ns, p_max=p_max, q_max=q_max,
                  prec=resolve(raw.get("prec")), fit=raw.get("fit"),
                  fg_table=raw.get("fg_table"), workers=int(raw.get("workers", 1)),
                  output=raw.get("output"), ratio_mode=bool(raw.get("ratio_mode", True)),
                  raw=dict(raw))
        if cfg.ratio_mode and isinstance(eps, list):
            for N in Ns:
                cfg.counts(N, eps)
        return cfg

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    @property
    def structure(self):
        return self.cuts if self.cuts is not None else default_cut_structure(self.potential)

    @property
    def basis_paths(self):
        return self.basis if self.basis is not None else default_basis(self.potential)

    def require_path(self):
        if self.path is None:
            raise ConfigError("config needs a generalized 'path'")
        return self.path

    def ids(self):
        if self.cut_ids is not None:
            return [int(i) for i in self.cut_ids]
        return [i for _, i in self.require_path().normalized()[1].nonzero]

    def n_total(self, N):
        return int(round(N * self.eps_tot))

    def counts(self, N, eps):
        """Integer counts ``n* = N eps*`` per cut id (the last takes the rest)."""
        ids = self.ids()
        if len(ids) != len(eps) + 1:
            raise ConfigError(f"{len(eps)} filling fractions need {len(eps) + 1} path ids, got {ids}")
        out = {}
        for i, e in zip(ids, eps):
            v = N * e
            if abs(v - mp.nint(v)) > INTEGRALITY_TOL:
                raise ConfigError(f"N eps* = {mp.nstr(v, 12)} is not an integer at N = {N}")
            out[i] = int(mp.nint(v))
        out[ids[-1]] = self.n_total(N) - sum(out.values())
        if out[ids[-1]] < 0:
            raise ConfigError("filling fractions exceed eps_tot")
        return FillingCounts.of(out, N)

    def nu(self):
        """Characteristics of the path's free ids (the last id carries c = 1)."""
        _, path = self.require_path().normalized()
        ch = path.characteristics
        return [ch.get(i, mp.mpc(0)) for i in self.ids()[:-1]]


# ----------------------------------------------------------------------
# pipeline pieces

def resolve_eps(cfg):
    if cfg.eps_star == "boutroux":
        eps, _, _ = boutroux_find(cfg.potential, cfg.structure, cfg.eps_tot, prec=cfg.prec)
        return eps
    if cfg.eps_star is None:
        raise ConfigError("config needs 'eps_star'")
    return list(cfg.eps_star)


def build_fg_table(cfg, eps, p_max=None):
    """Curve table, with F1' replaced by the oracle fit when configured."""
    p_max = cfg.p_max if p_max is None else p_max
    if cfg.fg_table:
        table = FgTable.load(cfg.fg_table)
        table.curve = solve_curve(cfg.potential, eps, cfg.structure, cfg.eps_tot, cfg.prec)
        return table, None
    fit = None
    overrides = {}
    if cfg.fit and p_max >= 1:
        fit = fit_from_oracle(cfg.potential, eps, cfg.fit["N"], ids=tuple(cfg.ids()),
                              basis=cfg.basis_paths, deltas=tuple(cfg.fit.get("deltas", (1, 2))),
                              prec=cfg.prec, depth=int(cfg.fit.get("depth", 3)))
        overrides[(1, 1)] = fit.values["F1'"]
    table = curve_table(cfg.potential, eps, p_max, cfg.structure, cfg.eps_tot,
                        prec=cfg.prec, overrides=overrides)
    if fit is not None:
        table.errors[(1, 1)] = fit.errors["F1'"]
    return table, fit


def oracle_ratio(cfg, N, eps):
    """``Zhat(gamma) / Z(n*)`` for the normalized path, plus both factors."""
    with working(cfg.prec):
        scale, path = cfg.require_path().normalized()
        oracle = Oracle(cfg.potential, N, cfg.basis_paths, cfg.prec)
        n = cfg.n_total(N)
        full = oracle.full(path, n)
        fixed = oracle.fixed_filling(cfg.counts(N, eps), radius="auto")
        return full / fixed, full, fixed


def _point(args):
    cfg, N, eps, table = args
    row = {"N": N}
    try:
        with working(cfg.prec):
            R, full, fixed = oracle_ratio(cfg, N, eps)
            exp = assemble_ratio(table, N, cfg.p_max, nu=cfg.nu(), prec=cfg.prec)
            row.update(R=R, Z_full=full, Z_fixed=fixed, S=exp.partial_sums)
            if cfg.q_max:
                corr = solve_corrections(table, None, cfg.q_max, N, cfg.nu(), prec=cfg.prec)
                row["resummed"] = eval_resummed(corr, N, cfg.prec)
    except ThetaMMError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def loglog_slope(Ns, errs):
    """Least-squares slope of log err against log N (None with fewer than 2 points)."""
    pts = [(math.log(n), math.log(float(e))) for n, e in zip(Ns, errs) if e and e > 0]
    if len(pts) < 2:
        return None
    mx = sum(p[0] for p in pts) / len(pts)
    my = sum(p[1] for p in pts) / len(pts)
    sxx = sum((p[0] - mx) ** 2 for p in pts)
    return sum((p[0] - mx) * (p[1] - my) for p in pts) / sxx


def parity_subsequences(Ns):
    """Alternate elements of the sorted N list (two interleaved subsequences)."""
    Ns = sorted(Ns)
    return {"even": Ns[0::2], "odd": Ns[1::2]}


def run_compare(cfg, log=None):
    """Oracle ratio versus predictions over the N sweep."""
    eps = resolve_eps(cfg)
    table, fit = build_fg_table(cfg, eps)
    jobs = [(cfg, N, eps, table) for N in cfg.N]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(_point, jobs))
    else:
        rows = []
        for job in jobs:
            rows.append(_point(job))
            if log:
                log(_row_summary(rows[-1]))
    with working(cfg.prec):
        for row in rows:
            if "error" in row:
                continue
            R = row["R"]
            row["rel_err"] = [abs(R - s) / abs(R) for s in row["S"]]
            if "resummed" in row:
                row["rel_err_resummed"] = abs(R - row["resummed"]) / abs(R)
        good = [r for r in rows if "error" not in r]
        slopes = {}
        for p in range(cfg.p_max + 1):
            entry = {"all": loglog_slope([r["N"] for r in good], [r["rel_err"][p] for r in good])}
            for name, sub in parity_subsequences([r["N"] for r in good]).items():
                sel = [r for r in good if r["N"] in sub]
                entry[name] = loglog_slope([r["N"] for r in sel], [r["rel_err"][p] for r in sel])
            slopes[f"S_{p}"] = entry
    report = {
        "eps_star": [mp.nstr(e, 20) for e in eps],
        "rows": rows,
        "slopes": slopes,
        "table": table.to_json(),
        "fit": None if fit is None else {k: mp.nstr(v, 15) for k, v in fit.values.items()},
        "partial": any("error" in r for r in rows),
    }
    if cfg.output:
        write_compare(report, cfg.output, cfg.p_max)
    return report


def _row_summary(row):
    if "error" in row:
        return f"N={row['N']}: {row['error']}"
    errs = " ".join(mp.nstr(abs(row["R"] - s) / abs(row["R"]), 4) for s in row["S"])
    return f"N={row['N']}: R={mp.nstr(row['R'], 15)} rel.err {errs}"


def write_compare(report, outdir, p_max):
    os.makedirs(outdir, exist_ok=True)
    header = ["N", "R_re", "R_im"]
    for p in range(p_max + 1):
        header += [f"S{p}_re", f"S{p}_im", f"S{p}_relerr"]
    header += ["resummed_re", "resummed_im", "resummed_relerr", "error"]
    with open(os.path.join(outdir, "compare.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in report["rows"]:
            if "error" in r:
                w.writerow([r["N"]] + [""] * (len(header) - 2) + [r["error"]])
                continue
            line = [r["N"], mp.nstr(mp.re(r["R"]), 25), mp.nstr(mp.im(r["R"]), 25)]
            for s, e in zip(r["S"], r["rel_err"]):
                line += [mp.nstr(mp.re(s), 25), mp.nstr(mp.im(s), 25), mp.nstr(e, 6)]
            if "resummed" in r:
                line += [mp.nstr(mp.re(r["resummed"]), 25), mp.nstr(mp.im(r["resummed"]), 25),
                         mp.nstr(r["rel_err_resummed"], 6)]
            else:
                line += ["", "", ""]
            w.writerow(line + [""])
    for p in range(p_max + 1):
        with open(os.path.join(outdir, f"error_S{p}.dat"), "w") as fh:
            for r in report["rows"]:
                if "error" not in r:
                    fh.write(f"{r['N']} {mp.nstr(r['rel_err'][p], 8)}\n")
    with open(os.path.join(outdir, "summary.json"), "w") as fh:
        json.dump(jsonable(report, drop=("rows",)), fh, indent=2)


def jsonable(obj, drop=()):
    """Convert mpmath numbers (and containers of them) for json.dump."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items() if k not in drop}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, mp.mpc):
        return [mp.nstr(obj.real, 25), mp.nstr(obj.imag, 25)]
    if isinstance(obj, mp.mpf):
        return mp.nstr(obj, 25)
    if isinstance(obj, mp.matrix):
        return [[jsonable(obj[i, j]) for j in range(obj.cols)] for i in range(obj.rows)]
    return obj


# ----------------------------------------------------------------------
# background independence

def predicted_integral(cfg, N, eps, p_max):
    """Partial sums for ``Zhat(gamma)`` itself: ``S_p(eps) * Z(n*(eps))``."""
    with working(cfg.prec):
        table, _ = build_fg_table(cfg, eps, p_max)
        oracle = Oracle(cfg.potential, N, cfg.basis_paths, cfg.prec)
        fixed = oracle.fixed_filling(cfg.counts(N, eps), radius="auto")
        exp = assemble_ratio(table, N, p_max, nu=cfg.nu(), prec=cfg.prec)
        scale, path = cfg.require_path().normalized()
        full = oracle.full(path, cfg.n_total(N))
        return [s * fixed for s in exp.partial_sums], full


def background_independence(cfg, eps_list, N, p_max=1):
    """Relative gap between predictions built on different base points."""
    with working(cfg.prec):
        preds = []
        full = None
        for eps in eps_list:
            S, full = predicted_integral(cfg, N, [_mpf(e) for e in eps], p_max)
            preds.append(S)
        gaps = []
        for p in range(p_max + 1):
            vals = [S[p] for S in preds]
            gaps.append(max(abs(a - b) for a in vals for b in vals) / abs(full))
        errs = [[abs(S[p] - full) / abs(full) for p in range(p_max + 1)] for S in preds]
        return {"N": N, "gaps": gaps, "errors": errs, "predictions": preds, "oracle": full}
