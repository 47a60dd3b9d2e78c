"""Filling-fraction derivatives of the free energies F_h at a base point.

Two independent estimators are provided:

* curve finite differences: F0' is an exact B-period, higher derivatives
  of F0 and all derivatives of F1 come from central differences over
  re-solved curves with Richardson extrapolation over {h, h/2, h/4};
* oracle fit: log-ratios of fixed-filling integrals fitted against the
  large-N expansion of ``ln Z``.
"""
import json
from dataclasses import dataclass, field

import mpmath as mp

from .errors import (CellBoundary, ConfigError, DegenerateCurve, FitIllConditioned,
                     MissingEntry, StepTooLarge)
from .oracle import Oracle
from .precision import resolve, working
from .spectral_curve import f1_value, solve_curve
from .tensors import SymTensor

PROVENANCE = ("curve-FD", "oracle-fit", "external", "synthetic")

# central difference weights for the m-th derivative, offsets -2..2, O(h^2)
_STENCILS = {
    0: {0: 1},
    1: {-1: mp.mpf(-1) / 2, 1: mp.mpf(1) / 2},
    2: {-1: 1, 0: -2, 1: 1},
    3: {-2: mp.mpf(-1) / 2, -1: 1, 1: -1, 2: mp.mpf(1) / 2},
    4: {-2: 1, -1: -4, 0: 6, 1: -4, 2: 1},
}


def stable_pairs(p_max):
    """Stable pairs (h, l): l >= 1, 1 <= 2h + l - 2 <= p_max, sorted by (order, h)."""
    out = []
    for p in range(1, p_max + 1):
        for h in range(0, p // 2 + 2):
            l = p + 2 - 2 * h
            if l >= 1:
                out.append((h, l))
    return out


@dataclass
class FgTable:
    """Tensors ``F_h^(l)`` at the base point ``eps_star``."""

    eps_star: list
    p_max: int
    entries: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)

    @property
    def gbar(self):
        return len(self.eps_star)

    def get(self, h, l):
        if (h, l) not in self.entries:
            raise MissingEntry(f"FgTable has no entry F_{h}^({l})")
        return self.entries[(h, l)]

    def scalar(self, h, l):
        return self.get(h, l)[(0,) * l]

    def to_json(self):
        return {
            "eps_star": [mp.nstr(e, 40) for e in self.eps_star],
            "p_max": self.p_max,
            "entries": [
                {"h": h, "l": l, "provenance": self.provenance.get((h, l), "external"),
                 "error": None if (h, l) not in self.errors else mp.nstr(self.errors[(h, l)], 5),
                 "values": t.to_json()}
                for (h, l), t in sorted(self.entries.items())
            ],
        }

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)

    @classmethod
    def from_json(cls, raw):
        eps = [mp.mpf(e) for e in raw["eps_star"]]
        entries, prov, errs = {}, {}, {}
        for item in raw["entries"]:
            key = (int(item["h"]), int(item["l"]))
            entries[key] = SymTensor.from_json(len(eps), key[1], item["values"])
            prov[key] = item.get("provenance", "external")
            if item.get("error") is not None:
                errs[key] = mp.mpf(item["error"])
        return build_table(eps, int(raw["p_max"]), entries, prov, errs)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def build_table(eps_star, p_max, entries, provenance=None, errors=None, extra_ok=True):
    """Validated :class:`FgTable`.

    Every stable pair up to ``p_max`` must be present; tensors are checked
    for dimension and rank.  Entries beyond ``p_max`` (e.g. external F_2
    data) are kept when ``extra_ok``.
    """
    g = len(eps_star)
    provenance = dict(provenance or {})
    clean = {}
    for key, t in entries.items():
        h, l = key
        if not isinstance(t, SymTensor):
            if g != 1:
                raise ConfigError("non-scalar entries must be SymTensor instances")
            t = SymTensor.scalar(t, l)
        if t.dim != g or t.rank != l:
            raise ConfigError(f"entry {key}: expected rank {l} over C^{g}")
        if not extra_ok and key not in stable_pairs(p_max):
            raise ConfigError(f"entry {key} is outside the stable set for p_max={p_max}")
        clean[key] = t
    for key in stable_pairs(p_max):
        if key not in clean:
            raise MissingEntry(f"stable pair F_{key[0]}^({key[1]}) missing for p_max={p_max}")
        provenance.setdefault(key, "external")
    return FgTable(list(eps_star), int(p_max), clean, provenance, dict(errors or {}))


def zero_table(gbar, p_max):
    entries = {k: SymTensor(gbar, k[1]) for k in stable_pairs(p_max)}
    return build_table([mp.mpf(0)] * gbar, p_max, entries, {k: "synthetic" for k in entries})


def random_table(gbar, p_max, rng, radius=1):
    """Table with random complex entries of modulus <= ``radius``."""
    entries = {}
    for h, l in stable_pairs(p_max):
        t = SymTensor(gbar, l)
        for key in t.data:
            r = radius * mp.sqrt(mp.mpf(rng.random()))
            t.data[key] = r * mp.expjpi(2 * mp.mpf(rng.random()))
        entries[(h, l)] = t
    return build_table([mp.mpf(0)] * gbar, p_max, entries, {k: "synthetic" for k in entries})


# ----------------------------------------------------------------------
# curve finite differences

@dataclass
class CurveSamples:
    """F0' and F1 on the stencil ``eps* + offset`` (gbar = 1)."""

    eps_star: object
    h: object
    f0p: dict
    f1: dict
    center: object


def _cell_radius(eps, eps_tot):
    return min(eps, eps_tot - eps)


def sample_curves(pot, eps_star, structure=None, eps_tot=1, h=None, prec=None):
    prec = resolve(prec)
    with working(prec):
        eps_star = mp.mpf(eps_star)
        eps_tot = mp.mpf(eps_tot)
        h = mp.mpf("1e-3") * _cell_radius(eps_star, eps_tot) if h is None else mp.mpf(h)
        offsets = sorted({s * j for s in (h, h / 2, h / 4) for j in (-2, -1, 0, 1, 2)})
        f0p, f1 = {}, {}
        center = None
        for off in offsets:
            try:
                c = solve_curve(pot, [eps_star + off], structure, eps_tot, prec)
            except DegenerateCurve as exc:
                raise CellBoundary(f"stencil point eps={mp.nstr(eps_star + off, 12)} degenerates") from exc
            f0p[off] = c.f0p[0]
            f1[off] = f1_value(c)
            if off == 0:
                center = c
    return CurveSamples(eps_star, h, f0p, f1, center)


def _fd(values, m, step):
    return mp.fsum(w * values[j * step] for j, w in _STENCILS[m].items()) / step ** m


def richardson_derivative(values, m, h, rel_tol=None):
    """m-th derivative from samples at multiples of h, h/2, h/4; returns (value, error)."""
    d = [_fd(values, m, h / 2 ** k) for k in range(3)]
    r1 = (4 * d[1] - d[0]) / 3
    r2 = (4 * d[2] - d[1]) / 3
    best = (16 * r2 - r1) / 15
    err = abs(best - r2)
    rel_tol = mp.mpf("1e-6") if rel_tol is None else rel_tol
    if err > rel_tol * max(abs(best), 1):
        raise StepTooLarge(f"Richardson estimates disagree ({mp.nstr(err, 3)}); reduce the step")
    return best, err


def f0_derivatives(pot, eps_star, structure=None, l_max=4, eps_tot=1, h=None, prec=None,
                   samples=None):
    """``{l: (SymTensor, error)}`` for F0^(l), l = 1..l_max (gbar = 1)."""
    if l_max > 5:
        raise ConfigError("l_max <= 5")
    if len(_as_list(eps_star)) != 1:
        raise ConfigError("curve derivatives are implemented for gbar = 1")
    prec = resolve(prec)
    with working(prec):
        s = samples or sample_curves(pot, _as_list(eps_star)[0], structure, eps_tot, h, prec)
        out = {1: (SymTensor.scalar(s.f0p[0], 1), mp.mpf(0))}
        for l in range(2, l_max + 1):
            v, e = richardson_derivative(s.f0p, l - 1, s.h)
            out[l] = (SymTensor.scalar(v, l), e)
    return out


def f1_derivatives(pot, eps_star, structure=None, l_max=2, eps_tot=1, h=None, prec=None,
                   samples=None):
    """``{l: (SymTensor, error)}`` for F1^(l), l = 1..l_max; empty for gbar = 0."""
    eps = _as_list(eps_star)
    if not eps:
        return {}
    if len(eps) != 1:
        raise ConfigError("curve derivatives are implemented for gbar = 1")
    if l_max > 4:
        raise ConfigError("l_max <= 4 for F1")
    prec = resolve(prec)
    with working(prec):
        s = samples or sample_curves(pot, eps[0], structure, eps_tot, h, prec)
        out = {}
        for l in range(1, l_max + 1):
            v, e = richardson_derivative(s.f1, l, s.h)
            out[l] = (SymTensor.scalar(v, l), e)
    return out


def _as_list(eps):
    if isinstance(eps, (list, tuple)):
        return list(eps)
    return [eps]


# ----------------------------------------------------------------------
# oracle fit

@dataclass
class OracleFit:
    values: dict       # name -> estimate
    errors: dict       # name -> error bar
    residual: object
    condition: object
    data: list         # (N, delta, log-ratio)


_FIT_COLUMNS = (
    # name, N power, delta power, coefficient
    ("F0'", 1, 1, 1),
    ("F0''", 0, 2, mp.mpf(1) / 2),
    ("F0'''", -1, 3, mp.mpf(1) / 6),
    ("F1'", -1, 1, 1),
    ("F0''''", -2, 4, mp.mpf(1) / 24),
    ("F1''", -2, 2, mp.mpf(1) / 2),
    ("F0^(5)", -3, 5, mp.mpf(1) / 120),
    ("F1'''", -3, 3, mp.mpf(1) / 6),
    ("F2'", -3, 1, 1),
)


def fit_columns(deltas, depth=3):
    """Identifiable model columns for the given filling offsets.

    Down to ``N^-depth``; within one power of N, at most as many columns of
    each delta-parity as there are distinct |delta| values (higher delta
    powers are dropped first, their effect is absorbed by the rest).
    """
    n_abs = len({abs(d) for d in deltas})
    groups = {}
    for col in _FIT_COLUMNS:
        if col[1] >= -depth:
            groups.setdefault((col[1], col[2] % 2), []).append(col)
    keep = []
    for col in _FIT_COLUMNS:
        if col[1] < -depth:
            continue
        group = sorted(groups[(col[1], col[2] % 2)], key=lambda c: c[2])
        if col in group[:n_abs]:
            keep.append(col)
    return keep


def fit_log_ratios(data, cols):
    """Least-squares fit of ``(N, delta, log Z(n*+delta) - log Z(n*))`` data."""
    A = mp.matrix(len(data), len(cols))
    b = mp.matrix(len(data), 1)
    for r, (N, delta, val) in enumerate(data):
        for c, (_, np_, dp, coef) in enumerate(cols):
            A[r, c] = coef * mp.mpf(N) ** np_ * mp.mpf(delta) ** dp
        b[r] = val
    # column equilibration before judging the conditioning
    norms = [mp.norm(A[:, c]) for c in range(A.cols)]
    As = mp.matrix(A.rows, A.cols)
    for r in range(A.rows):
        for c in range(A.cols):
            As[r, c] = A[r, c] / norms[c]
    sv = mp.svd_r(As, compute_uv=False)
    cond = max(sv) / min(sv) if min(sv) > 0 else mp.inf
    if cond > mp.mpf("1e12"):
        raise FitIllConditioned(f"design matrix condition {mp.nstr(cond, 4)}")
    x, res = mp.qr_solve(As, b)
    sol = {col[0]: x[c] / norms[c] for c, col in enumerate(cols)}
    return sol, res, cond


def fit_from_oracle(pot, eps_star, N_list, ids=(2, 3), basis=None, deltas=(1, 2), prec=None,
                    depth=3):
    """Estimate F0', F0'', F0''', F1' from fixed-filling oracle values.

    For every N, ``n* = N eps*`` on the first basis id and ``N - n*`` on the
    second; ``ln Z(n* + d) - ln Z(n*)`` for ``d = +-deltas`` is fitted to

        N F0' d + F0'' d^2/2 + (F0''' d^3/6 + F1' d)/N + O(N^-2)

    with the terms down to ``N^-depth`` as nuisance parameters.  Error bars
    combine the shift of each estimate when the last order is dropped with
    the least-squares residual.
    """
    eps = _as_list(eps_star)
    if len(eps) != 1:
        raise ConfigError("oracle fit needs exactly one independent filling (gbar = 1)")
    if len(N_list) < 4:
        raise ConfigError("need at least 4 values of N")
    prec = resolve(prec)
    data = []
    with working(prec):
        eps0 = mp.mpf(eps[0])
        for N in N_list:
            nstar = eps0 * N
            if abs(nstar - mp.nint(nstar)) > mp.mpf("1e-9"):
                raise ConfigError(f"N eps* = {mp.nstr(nstar, 12)} is not an integer at N={N}")
            nstar = int(mp.nint(nstar))
            if nstar - max(deltas) < 0 or nstar + max(deltas) > N:
                raise ConfigError("filling offsets leave the admissible range")
            oracle = Oracle(pot, N, basis, prec)
            radius = oracle.balanced_radius(list(ids), N, nstar)
            table = oracle.fixed_filling_table(list(ids), N, radius=[radius])
            base = mp.log(table[(nstar, N - nstar)])
            for d in deltas:
                for sgn in (1, -1):
                    k = nstar + sgn * d
                    data.append((N, sgn * d, mp.re(mp.log(table[(k, N - k)]) - base)))
        values, res, cond = fit_log_ratios(data, fit_columns(deltas, depth))
        lower, _, _ = fit_log_ratios(data, fit_columns(deltas, depth - 1))
        errors = {name: abs(values[name] - lower[name]) + res / mp.sqrt(len(data))
                  for name in lower}
    return OracleFit(values, errors, res, cond, data)


# ----------------------------------------------------------------------
# assembling the table

def curve_table(pot, eps_star, p_max, structure=None, eps_tot=1, h=None, prec=None,
                overrides=None):
    """FgTable from curve finite differences (gbar = 1, p_max <= 3).

    ``overrides`` maps (h, l) to values from another estimator (e.g. the
    oracle fit), recorded with provenance ``oracle-fit``.
    """
    needed = stable_pairs(p_max)
    l0 = max([l for h_, l in needed if h_ == 0] + [1])
    l1 = max([l for h_, l in needed if h_ == 1] + [0])
    if any(h_ >= 2 for h_, _ in needed):
        raise ConfigError("F2 derivatives are not computed; supply them externally")
    prec = resolve(prec)
    with working(prec):
        s = sample_curves(pot, _as_list(eps_star)[0], structure, eps_tot, h, prec)
        f0 = f0_derivatives(pot, eps_star, structure, max(l0, 2), eps_tot, h, prec, samples=s)
        f1 = f1_derivatives(pot, eps_star, structure, l1, eps_tot, h, prec, samples=s) if l1 else {}
        entries, prov, errs = {}, {}, {}
        for (hh, l) in needed:
            src = f0 if hh == 0 else f1
            entries[(hh, l)], errs[(hh, l)] = src[l]
            prov[(hh, l)] = "curve-FD"
        for key, value in (overrides or {}).items():
            entries[key] = value if isinstance(value, SymTensor) else SymTensor.scalar(value, key[1])
            prov[key] = "oracle-fit"
        table = build_table(_as_list(eps_star), p_max, entries, prov, errs)
        table.curve = s.center
        table.f0_second = f0[2][0]
    return table
