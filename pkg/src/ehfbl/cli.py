"""Command-line entry point: ``ehfbl {bounds,figure,sim,optimize}``.

Every flag may also come from a flat JSON file given with ``--config``
(keys are the long flag names); flags on the command line win. Outputs carry
a header with the tool version, the fully resolved config, the seed and the
units, and re-running with that config reproduces them bitwise.

Exit codes: 0 ok, 2 invalid input, 3 infeasible (with ``--strict``, or an
all-infeasible optimizer grid), 4 a Monte Carlo run contradicting a bound.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from typing import Optional

import numpy as np

from . import __version__
from .bounds import (BaselineKind, ChannelSpec, Constant, Infeasible, SchemeConfig,
                     SquaredGaussian, asymptotic_curves, baseline, capacity,
                     corollary_best_effort, corollary_save, db_to_linear, theorem_log_M)
from .ehsim import MismatchStats, load_energy_trace, mc_escape, mc_mismatch
from .linksim import mc_false_alarm, mc_link_error, mc_miss_term, mc_shannon, miss_threshold
from .optimizer import SearchSpec, optimize
from .specmath import ConfidenceEstimate

EXIT_INVALID = 2
EXIT_INFEASIBLE = 3
EXIT_VIOLATED = 4

FIGURES = ("1a", "1b", "2a", "2b", "3a", "3b")
N_GRID = (1e3, 1e7, 30)
SNR_GRID = (-10, 40, 1)
FIG3_N = 100_000


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# flag plumbing

def _channel_flags(p):
    p.add_argument("--p", type=float, help="recharge rate P (linear SNR)")
    p.add_argument("--snr-db", type=float, help="recharge rate in dB")
    p.add_argument("--l", type=int, help="energy block length L")
    p.add_argument("--energy", choices=["squared_gaussian", "constant"])


def _output_flags(p):
    p.add_argument("--config", help="flat JSON file of flag values")
    p.add_argument("--units", choices=["nats", "bits"])
    p.add_argument("--out", help="output file (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ehfbl", description=__doc__.splitlines()[0],
                 argument_default=argparse.SUPPRESS)
    ap.add_argument("--version", action="version", version=f"ehfbl {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bounds", help="evaluate one rate bound", argument_default=argparse.SUPPRESS)
    _channel_flags(b)
    _output_flags(b)
    b.add_argument("--scheme", choices=["save", "best", "theorem", "fto17", "noneh",
                                        "asympt-save", "asympt-best"])
    b.add_argument("--n", type=int)
    b.add_argument("--m", type=int)
    b.add_argument("--rho", type=float)
    b.add_argument("--eps", type=float)
    b.add_argument("--eps1", type=float)
    b.add_argument("--eps2", type=float)
    b.add_argument("--format", choices=["json", "csv"])
    b.add_argument("--strict", action="store_true")

    f = sub.add_parser("figure", help="write a figure's curves as CSV",
                       argument_default=argparse.SUPPRESS)
    f.add_argument("id", choices=FIGURES)
    _output_flags(f)

    s = sub.add_parser("sim", help="Monte Carlo checks", argument_default=argparse.SUPPRESS)
    ssub = s.add_subparsers(dest="sim", required=True, parser_class=_Parser)
    for name in ("mismatch", "escape", "miss", "false-alarm", "link"):
        q = ssub.add_parser(name, argument_default=argparse.SUPPRESS)
        _channel_flags(q)
        _output_flags(q)
        q.add_argument("--trials", type=int)
        q.add_argument("--seed", type=int)
        q.add_argument("--n", type=int)
        q.add_argument("--m", type=int)
        q.add_argument("--rho", type=float)
        if name == "mismatch":
            q.add_argument("--gamma", type=float)
            q.add_argument("--trace-file")
        if name == "escape":
            q.add_argument("--horizon", type=int)
        if name in ("miss", "link"):
            q.add_argument("--eps1", type=float)
            q.add_argument("--eps2", type=float)
        if name == "miss":
            q.add_argument("--method", choices=["auto", "direct", "chi2"])
        if name in ("false-alarm", "link"):
            q.add_argument("--M", type=int)
        if name == "false-alarm":
            q.add_argument("--gamma", type=float)
            q.add_argument("--delta", type=float)
            q.add_argument("--shannon", action="store_true")
        if name == "link":
            q.add_argument("--log-xi", type=float)
            q.add_argument("--bound", type=float, help="error level to certify against")

    o = sub.add_parser("optimize", help="search (rho, m, eps1) for the best bound",
                       argument_default=argparse.SUPPRESS)
    _channel_flags(o)
    _output_flags(o)
    o.add_argument("--n", type=int)
    o.add_argument("--eps", type=float)
    o.add_argument("--rho-values", help="comma-separated rho grid")
    o.add_argument("--m-values", help="comma-separated saving-block grid")
    o.add_argument("--eps1-fractions", help="comma-separated eps1/eps grid")
    o.add_argument("--grid", choices=["default", "corollary"])
    o.add_argument("--no-refine", action="store_true")
    o.add_argument("--trace", action="store_true", help="include every evaluated point")
    return ap


DEFAULTS = {"l": 1, "energy": "squared_gaussian", "units": "nats", "format": "json",
            "strict": False, "method": "auto", "shannon": False, "grid": "default",
            "no_refine": False, "trace": False, "gamma": 0.0}

_INTERNAL = {"command", "sim", "config", "out", "id"}


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults, the JSON file and the command line, in that order."""
    given = vars(args)
    cfg = {}
    path = given.get("config")
    if path:
        with open(path) as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a flat JSON object")
        cfg = {k.replace("-", "_"): v for k, v in raw.items()}
        # emitted headers carry the subcommand; accept it when it agrees
        for k in ("sim", "id"):
            if k in cfg:
                if cfg.pop(k) != given.get(k):
                    raise UsageError(f"config key {k!r} does not match the command line")
    out = {}
    for k, v in DEFAULTS.items():
        out[k] = v
    out.update(cfg)
    out.update({k: v for k, v in given.items() if k not in _INTERNAL})
    known = {a.dest for a in _all_actions(args)}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    # only keep keys this command understands
    return {k: out[k] for k in sorted(out) if k in known}


_ACTIONS = {}


def _all_actions(args):
    return _ACTIONS[(args.command, getattr(args, "sim", None))]


def _index_actions(parser):
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, p in sub.choices.items():
        if name == "sim":
            ss = next(a for a in p._actions if isinstance(a, argparse._SubParsersAction))
            for sname, sp in ss.choices.items():
                _ACTIONS[(name, sname)] = [a for a in sp._actions if a.dest not in _INTERNAL | {"help"}]
        else:
            _ACTIONS[(name, None)] = [a for a in p._actions if a.dest not in _INTERNAL | {"help"}]


def _need(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise UsageError(f"--{k.replace('_', '-')} is required")


def _spec(cfg) -> ChannelSpec:
    if cfg.get("p") is not None:
        P = float(cfg["p"])
    elif cfg.get("snr_db") is not None:
        P = db_to_linear(float(cfg["snr_db"]))
    else:
        raise UsageError("one of --p or --snr-db is required")
    if not P > 0 or not math.isfinite(P):
        raise UsageError(f"P > 0 required, got {P!r}")
    energy = SquaredGaussian(P) if cfg["energy"] == "squared_gaussian" else Constant(P)
    try:
        return ChannelSpec(P, energy, int(cfg["l"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _eps_split(cfg):
    e1, e2, e = cfg.get("eps1"), cfg.get("eps2"), cfg.get("eps")
    if e1 is not None and e2 is not None:
        return float(e1), float(e2)
    if e is not None:
        return float(e) / 2, float(e) / 2
    raise UsageError("give --eps1 and --eps2, or --eps")


def _scheme_point(cfg, spec, eps1, eps2):
    """(m, rho) from flags, falling back to the saving-phase corollary."""
    _need(cfg, "n")
    n = int(cfg["n"])
    m, rho = cfg.get("m"), cfg.get("rho")
    if m is None or rho is None:
        cp = corollary_save(spec, n, eps1, eps2)
        if cp.m is None or not cp.bound.feasible:
            raise Infeasible(f"no corollary point at n={n}: {cp.bound.reason}")
        m = cp.m if m is None else m
        rho = cp.rho if rho is None else rho
    return SchemeConfig(n, int(m), float(rho), eps1, eps2)


# --------------------------------------------------------------------------
# commands

def _header(cfg, seed=None):
    return {"tool": "ehfbl", "version": __version__, "config": cfg, "seed": seed,
            "units": cfg.get("units", "nats")}


def _scale(cfg) -> float:
    return 1.0 / math.log(2.0) if cfg.get("units") == "bits" else 1.0


def cmd_bounds(cfg) -> tuple[dict, int]:
    spec = _spec(cfg)
    _need(cfg, "scheme", "n")
    n = int(cfg["n"])
    if n < 1:
        raise UsageError("--n must be positive")
    sc = _scale(cfg)
    scheme = cfg["scheme"]
    res = {"scheme": scheme}
    if scheme in ("save", "best", "theorem"):
        eps1, eps2 = _eps_split(cfg)
        if scheme == "theorem":
            rb = theorem_log_M(spec, _scheme_point(cfg, spec, eps1, eps2))
            extra = {}
        else:
            fn = corollary_save if scheme == "save" else corollary_best_effort
            cp = fn(spec, n, eps1, eps2)
            rb = cp.bound
            extra = {"rho": cp.rho, "m": cp.m,
                     "theorem": None if cp.theorem is None else cp.theorem.as_dict(sc)}
        res.update(rb.as_dict(sc))
        res.update(extra)
    else:
        if scheme == "fto17":
            if spec.L == 1:
                eps1, eps2 = _eps_split(cfg)
                r = baseline(BaselineKind.FTO17_IID, spec, n, eps1=eps1, eps2=eps2)
            else:
                r = baseline(BaselineKind.FTO17_BLOCK, spec, n, eps=_total_eps(cfg))
        elif scheme == "noneh":
            r = baseline(BaselineKind.POWER_CONSTRAINED, spec, n, eps=_total_eps(cfg))
        else:
            save, best = asymptotic_curves(spec, n, _total_eps(cfg))
            r = save if scheme == "asympt-save" else best
        res.update({"feasible": True, "rate": r * sc, "log_M": r * n * sc, "terms": {},
                    "aux": {}, "reason": ""})
    res["status"] = "ok" if res["feasible"] else "infeasible"
    code = EXIT_INFEASIBLE if (cfg.get("strict") and not res["feasible"]) else 0
    return res, code


def _total_eps(cfg) -> float:
    if cfg.get("eps") is not None:
        return float(cfg["eps"])
    e1, e2 = _eps_split(cfg)
    return e1 + e2


def _n_grid():
    lo, hi, k = N_GRID
    return [int(round(v)) for v in np.geomspace(lo, hi, k)]


def _snr_grid():
    lo, hi, step = SNR_GRID
    return list(range(lo, hi + 1, step))


def _rate_or_none(rb):
    return rb.rate if rb.feasible else None


def _iid_row(P, n):
    spec = ChannelSpec(P)
    e1 = e2 = 0.01
    return [_rate_or_none(corollary_save(spec, n, e1, e2).bound),
            _rate_or_none(corollary_best_effort(spec, n, e1, e2).bound),
            baseline(BaselineKind.FTO17_IID, spec, n, eps1=e1, eps2=e2),
            baseline(BaselineKind.POWER_CONSTRAINED, spec, n, eps=e1 + e2),
            capacity(P)]


def _block_row(P, n):
    spec = ChannelSpec(P, L=math.ceil(math.sqrt(n)))
    eps = 0.01
    save, best = asymptotic_curves(spec, n, eps)
    return [save, best,
            baseline(BaselineKind.FTO17_BLOCK, spec, n, eps=eps),
            baseline(BaselineKind.POWER_CONSTRAINED, spec, n, eps=eps),
            capacity(P)]


IID_COLUMNS = ["save", "best_effort", "fto17_iid", "noneh", "capacity"]
BLOCK_COLUMNS = ["save_asymptotic", "best_effort_asymptotic", "fto17_block", "noneh", "capacity"]


def figure_table(fig_id: str):
    """(x name, columns, rows, parameters) for one figure. Infeasible
    entries are ``None``; all other values are raw rates in nats."""
    if fig_id not in FIGURES:
        raise UsageError(f"unknown figure {fig_id!r}")
    num, panel = fig_id[0], fig_id[1]
    if num in "12":
        snr = 25.0 if panel == "a" else 0.0
        P = db_to_linear(snr)
        row = _iid_row if num == "1" else _block_row
        xs = _n_grid()
        rows = [[x] + row(P, x) for x in xs]
        params = {"snr_db": snr, "n_grid": "30 log-spaced points in [1e3, 1e7], rounded"}
        xname = "n"
    else:
        row = _iid_row if panel == "a" else _block_row
        xs = _snr_grid()
        rows = [[x] + row(db_to_linear(x), FIG3_N) for x in xs]
        params = {"n": FIG3_N, "snr_grid": "-10..40 dB step 1"}
        xname = "snr_db"
    if num == "1" or fig_id == "3a":
        cols = IID_COLUMNS
        params.update(L=1, eps1=0.01, eps2=0.01, noneh_eps=0.02)
    else:
        cols = BLOCK_COLUMNS
        params.update(L="ceil(sqrt(n))", eps=0.01, noneh_eps=0.01)
    return xname, cols, rows, params


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".9g")


def cmd_figure(cfg, fig_id) -> str:
    xname, cols, rows, params = figure_table(fig_id)
    sc = _scale(cfg)
    hdr = _header(dict(cfg, id=fig_id))
    hdr["figure"] = params
    buf = io.StringIO()
    buf.write(f"# {json.dumps(hdr, sort_keys=True)}\n")
    buf.write(",".join([xname] + cols) + "\n")
    for r in rows:
        vals = [r[0]] + [None if v is None else v * sc for v in r[1:]]
        buf.write(",".join(_fmt(v) for v in vals) + "\n")
    return buf.getvalue()


def _sim_common(cfg):
    _need(cfg, "trials", "seed")
    if int(cfg["trials"]) < 1:
        raise UsageError("--trials must be positive")
    return int(cfg["trials"]), int(cfg["seed"])


def cmd_sim(cfg, which) -> tuple[dict, int]:
    spec = _spec(cfg)
    trials, seed = _sim_common(cfg)
    if which in ("mismatch", "escape", "false-alarm"):
        _need(cfg, "n", "m", "rho")
        config = SchemeConfig(int(cfg["n"]), int(cfg["m"]), float(cfg["rho"]), 0.01, 0.01)
        config.validate(spec)
    if which == "mismatch":
        trace = None
        if cfg.get("trace_file"):
            trace = load_energy_trace(cfg["trace_file"], config.n, spec.L)
        stats = mc_mismatch(spec, config, float(cfg["gamma"]), trials, seed, trace)
    elif which == "escape":
        stats = mc_escape(spec, config, trials, seed, horizon=cfg.get("horizon"))
    elif which == "false-alarm":
        _need(cfg, "M", "delta")
        if cfg.get("shannon"):
            stats = mc_shannon(config.n, config.power(spec), int(cfg["M"]), float(cfg["delta"]),
                               trials, seed)
        else:
            stats = mc_false_alarm(spec, config, int(cfg["M"]), float(cfg["gamma"]),
                              float(cfg["delta"]), trials, seed)
    elif which == "miss":
        eps1, eps2 = _eps_split(cfg)
        config = _scheme_point(cfg, spec, eps1, eps2)
        thr = miss_threshold(spec, config)
        est = mc_miss_term(spec, config, trials, seed, threshold=thr, method=cfg["method"])
        n_m = config.n_m(spec)
        stats = MismatchStats(est, eps1 - 4.0 / math.sqrt(n_m), "matched sum < log xi + 2 S D~ (gamma+1)",
                              {"n": config.n, "m": config.m, "rho": config.rho,
                               "eps1": eps1, "eps2": eps2, "threshold": thr})
    else:
        _need(cfg, "M")
        eps1, eps2 = (cfg.get("eps1") or 0.01), (cfg.get("eps2") or 0.01)
        config = _scheme_point(cfg, spec, float(eps1), float(eps2))
        est = mc_link_error(spec, config, int(cfg["M"]), trials, seed, log_xi=cfg.get("log_xi"))
        bound = cfg.get("bound")
        stats = MismatchStats(est, math.inf if bound is None else float(bound), "declared != sent",
                              {"n": config.n, "m": config.m, "rho": config.rho, "M": int(cfg["M"]),
                               "log_xi": cfg.get("log_xi")})
    res = stats.as_dict()
    if which == "link" and cfg.get("bound") is None:
        res["bound"] = None
        res["verdict"] = "unchecked"
    code = EXIT_VIOLATED if res["verdict"] == "violated" else 0
    return res, code


def _floats(v):
    if v is None:
        return None
    if isinstance(v, str):
        return [float(t) for t in v.split(",") if t.strip()]
    return [float(t) for t in v]


def cmd_optimize(cfg) -> tuple[dict, int]:
    spec = _spec(cfg)
    _need(cfg, "n", "eps")
    n, eps = int(cfg["n"]), float(cfg["eps"])
    sc = _scale(cfg)
    ref = corollary_save(spec, n, eps / 2, eps / 2)
    if cfg["grid"] == "corollary":
        if ref.m is None or not ref.bound.feasible:
            raise Infeasible("corollary point is infeasible")
        search = SearchSpec([ref.rho], [ref.m], [0.5], refine=False)
    else:
        ms = _floats(cfg.get("m_values"))
        search = SearchSpec(_floats(cfg.get("rho_values")),
                            None if ms is None else [int(v) for v in ms],
                            _floats(cfg.get("eps1_fractions")),
                            refine=not cfg.get("no_refine"))
    best = optimize(spec, n, eps, search)
    ref_thm = ref.theorem if ref.theorem is not None else None
    ref_logm = ref_thm.log_M if ref_thm is not None and ref_thm.feasible else None
    res = {
        "best": {"n": best.config.n, "m": best.config.m, "rho": best.config.rho,
                 "eps1": best.config.eps1, "eps2": best.config.eps2},
        "bound": best.bound.as_dict(sc),
        "corollary": {"rho": ref.rho, "m": ref.m,
                      "theorem": None if ref_thm is None else ref_thm.as_dict(sc)},
        "improvement": None if ref_logm is None else (best.bound.log_M - ref_logm) * sc,
        "evaluations": len(best.trace),
    }
    if cfg.get("trace"):
        res["trace"] = [dict(t, log_M=None if t["log_M"] is None else t["log_M"] * sc)
                        for t in best.trace]
    return res, 0


# --------------------------------------------------------------------------


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, ConfidenceEstimate):
        return o.as_dict()
    raise TypeError(f"not serializable: {type(o).__name__}")


def _clean(o):
    """Non-finite floats become null so the output stays strict JSON."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)) and not math.isfinite(o):
        return None
    return o


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _bounds_csv(hdr, res) -> str:
    buf = io.StringIO()
    buf.write(f"# {json.dumps(_clean(hdr), sort_keys=True, default=_json_default)}\n")
    cols = ["scheme", "status", "rate", "log_M"] + [f"term_{k}" for k in res["terms"]]
    buf.write(",".join(cols) + "\n")
    vals = [res["scheme"], res["status"], _fmt(res["rate"]), _fmt(res["log_M"])]
    vals += [_fmt(v) for v in res["terms"].values()]
    buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def main(argv=None) -> int:
    parser = build_parser()
    _index_actions(parser)
    try:
        args = parser.parse_args(argv)
        cfg = resolve(args)
        out = vars(args).get("out") or cfg.get("out")
        if args.command == "figure":
            _emit(cmd_figure(cfg, args.id), out)
            return 0
        if args.command == "bounds":
            res, code = cmd_bounds(cfg)
            hdr = _header(cfg)
            if cfg["format"] == "csv":
                _emit(_bounds_csv(hdr, res), out)
                return code
        elif args.command == "sim":
            res, code = cmd_sim(cfg, args.sim)
            hdr = _header(dict(cfg, sim=args.sim), cfg.get("seed"))
        else:
            res, code = cmd_optimize(cfg)
            hdr = _header(cfg)
        doc = dict(hdr, result=res)
        _emit(json.dumps(_clean(doc), indent=2, sort_keys=True, default=_json_default) + "\n", out)
        return code
    except UsageError as exc:
        print(f"ehfbl: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Infeasible as exc:
        print(f"ehfbl: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"ehfbl: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
