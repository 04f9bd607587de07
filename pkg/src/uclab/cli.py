"""``uclab``: command-line runner for the spectral observability experiments.

Every run is described by a flat configuration dictionary (defaults, then
``--config`` JSON, then explicit flags).  The full configuration and its
SHA-256 hash are embedded in the JSON record, so a record alone is enough
to reproduce it.

Exit codes: 0 pass/complete, 1 inequality failure, 2 hypothesis violation,
3 numerically inconclusive.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import constants as K
from .errors import HypothesisViolation, InconclusiveError, QuadratureError
from .funclass import certify_A, certify_B, certify_polynomial, verify_conversion
from .geometry import Domain, make_equidistributed
from .spectral import PotentialSpec, SpectralFunction, build_system, eigenvalue_sandwich_check

EXIT_OK, EXIT_FAIL, EXIT_HYPOTHESIS, EXIT_INCONCLUSIVE = 0, 1, 2, 3

GLOBAL_DEFAULTS = {"seed": 0, "threads": 1, "out": None, "timings": False}
EXECUTION_KEYS = ("threads", "out", "timings")
DOMAIN_DEFAULTS = {"d": 1, "L": 1.0, "bc": "dirichlet", "potential": "zero", "lambda_max": None, "n_modes": 50}
SEQ_DEFAULTS = {"G": 1.0, "delta": 0.1, "mode": "centered"}

DEFAULTS = {
    "spectrum": {**DOMAIN_DEFAULTS, "count": None},
    "certify": {**DOMAIN_DEFAULTS, "function": "random:20", "kappa": 49.0, "cls": None, "C2": None,
                "epsilon": None},
    "constants": {"d": 1, "G": 1.0, "delta": 0.1, "kappa": 49.0, "v_inf": 0.0, "v_plus": 0.0, "v_minus": 0.0,
                  "D_A": None, "D_B": None, "N_A": None, "N_B": None},
    "observe": {**DOMAIN_DEFAULTS, **SEQ_DEFAULTS, "subspace": None, "variant": None, "function": None,
                "kappa": 49.0, "D": None, "N": None, "n_trunc": None},
    "sweep": {**DOMAIN_DEFAULTS, **SEQ_DEFAULTS, "subspace": None, "variant": "B", "function": None,
              "kappa": 49.0, "D": math.e, "N": None, "n_trunc": None, "param": "delta", "values": [],
              "figure": True},
    "ghost": {**DOMAIN_DEFAULTS, **SEQ_DEFAULTS, "check": "two-sided", "function": "random:10", "T": 1.0,
              "quadrature": True, "n_points": 65536},
    "counterexample": {**DOMAIN_DEFAULTS, **SEQ_DEFAULTS, "n_modes": 1200, "kappa": 1.0, "radius_fraction": 0.9,
                       "kappa_exp": 49.0},
    "verify": {},
}

SWEEPABLE = ("delta", "L", "G", "kappa", "D", "N", "n_modes", "lambda_max", "seed")
CSV_COLUMNS = ("param", "value", "seed", "sharp_constant", "sharp_upper", "formula_constant", "margin", "status",
               "message")


# ---------------------------------------------------------------------------
# serialisation


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become the strings ``inf``, ``-inf``, ``nan``."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return {"re": to_jsonable(obj.real), "im": to_jsonable(obj.imag)}
    return obj


def dumps(obj):
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def config_hash(config):
    canon = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# builders shared by subcommands


def _domain(cfg):
    return Domain(int(cfg["d"]), float(cfg["L"]), cfg["bc"])


def _system(cfg):
    lam = cfg.get("lambda_max")
    n = None if lam is not None else cfg.get("n_modes")
    return build_system(_domain(cfg), PotentialSpec.parse(cfg["potential"]), lambda_max=lam, n_modes=n)


def _sequence(cfg, domain):
    return make_equidistributed(domain, float(cfg["G"]), float(cfg["delta"]), cfg["mode"], cfg["seed"])


def parse_function(text, system, seed):
    """``mode:k``, ``random:n`` (seeded normal coefficients on the first n modes) or ``alpha:a,b,…``."""
    kind, _, arg = text.partition(":")
    alpha = np.zeros(len(system), dtype=complex)
    if kind == "mode":
        alpha[int(arg)] = 1.0
    elif kind == "random":
        n = int(arg)
        if not 1 <= n <= len(system):
            raise ValueError(f"random:{n} needs between 1 and {len(system)} modes")
        alpha[:n] = np.random.default_rng(seed).standard_normal(n)
    elif kind == "alpha":
        vals = [complex(v) for v in arg.split(",") if v.strip()]
        if len(vals) > len(system):
            raise ValueError("more coefficients than modes")
        alpha[: len(vals)] = vals
    else:
        raise ValueError(f"unknown function spec {text!r}")
    return SpectralFunction(system, alpha)


# ---------------------------------------------------------------------------
# subcommands: each returns (exit_code, result dict)


def run_spectrum(cfg):
    system = _system(cfg)
    rep = eigenvalue_sandwich_check(system)
    count = cfg.get("count") or len(system)
    res = {"n_modes": len(system), "E": system.E[:count], "lambda": system.lam[:count],
           "modes": system.basis.y[:count], "bounds": vars(system.bounds),
           "sandwich": {"ok": rep.ok, "checked": rep.checked, "worst": rep.worst}}
    return (EXIT_OK if rep.ok else EXIT_FAIL), res


def run_certify(cfg):
    system = _system(cfg)
    phi = parse_function(cfg["function"], system, cfg["seed"])
    kappa = float(cfg["kappa"])
    a, b = certify_A(phi, kappa), certify_B(phi, kappa)
    res = {"kappa": kappa, "log_D_B_min": a.log_D_B_min, "log_D_A_min": b.log_D_A_min,
           "D_poly": certify_polynomial(phi, kappa)}
    cls = cfg.get("cls")
    if cls is not None:
        E = system.E
        if cls == "A":
            log_d, terms = a.log_D_B_min, a.per_k
        elif cls == "B":
            log_d, terms = b.log_D_A_min, b.per_k
        else:
            a2 = np.abs(phi.alpha) ** 2
            with np.errstate(divide="ignore"):
                terms = kappa * np.log(np.maximum(E, 0.0)) + np.log(a2 / a2.sum())
            log_d = math.log(res["D_poly"])
        res.update({"class": cls, "log_D_min": log_d, "D_min": math.exp(log_d) if log_d < 709 else math.inf,
                    "per_k_table": [{"k": k, "E": float(E[k]), "log_term": float(t)} for k, t in enumerate(terms)]})
    code = EXIT_OK
    if cfg.get("C2") is not None:
        conv = verify_conversion(phi, float(cfg["C2"]), float(cfg["epsilon"]))
        res["conversion"] = {"holds": conv.holds, "log_slack": conv.log_slack}
        code = EXIT_OK if conv.holds else EXIT_FAIL
    return code, res


def run_constants(cfg):
    keys = ("d", "G", "delta", "kappa", "v_inf", "v_plus", "v_minus", "D_A", "D_B", "N_A", "N_B")
    bundle = K.ConstantBundle(**{k: cfg[k] for k in keys})
    return EXIT_OK, bundle.to_dict()


def observe_core(cfg):
    """Shared by ``observe`` and each sweep row."""
    from .observability import (ClassSpec, gram, sharp_subspace_constant, verify_theorem)

    system = _system(cfg)
    seq = _sequence(cfg, system.domain)
    g = gram(system, seq)
    res = {"n_modes": len(system), "gram_method": g.method}
    N, kappa = cfg.get("N"), float(cfg["kappa"])
    v = system.bounds
    if cfg.get("subspace"):
        s = sharp_subspace_constant(g, int(cfg["subspace"]))
        res.update(sharp_constant=s.value, sharp_upper=s.value, n_used=s.n_used, extended=s.extended)
        if N is None:
            return EXIT_OK, res
        log_db = kappa * math.sqrt(max(float(system.E[s.n_used - 1]), 0.0))
        bundle = K.ConstantBundle(system.domain.d, seq.G, seq.delta, kappa, v.v_inf, v.v_plus, v.v_minus,
                                  log_D_B=log_db, N_B=float(N))
        log_c = K.log_c_sfuc("B", bundle)
        res.update(formula_constant=math.exp(log_c), log_formula_constant=log_c, log_D=log_db,
                   margin=s.value - math.exp(log_c))
        return (EXIT_OK if s.value >= math.exp(log_c) else EXIT_FAIL), res
    variant = cfg.get("variant")
    if variant not in ("A", "B"):
        raise ValueError("observe needs --subspace or --class A|B")
    if N is None:
        raise ValueError("--N is required for a class comparison")
    D = cfg.get("D")
    bundle = K.ConstantBundle(system.domain.d, seq.G, seq.delta, kappa, v.v_inf, v.v_plus, v.v_minus,
                              **({"D_A": D, "N_A": float(N)} if variant == "A" else {"D_B": D, "N_B": float(N)}))
    if cfg.get("function"):
        target = parse_function(cfg["function"], system, cfg["seed"])
    else:
        if D is None:
            raise ValueError("--D is required for a class comparison")
        target = ClassSpec(kappa, float(D), cfg.get("n_trunc"))
    rep = verify_theorem(target, variant, bundle, g)
    out = rep.to_dict()
    out["sharp_constant"] = out.pop("ratio")
    out["formula_constant"] = out.pop("c_sfuc_formula")
    res.update(out)
    return (EXIT_OK if rep.status == "PASS" else EXIT_FAIL), res


def run_observe(cfg):
    return observe_core(cfg)


def _sweep_row(args):
    cfg, param, value, seed = args
    row = {"param": param, "value": value, "seed": seed, "sharp_constant": None, "sharp_upper": None,
           "formula_constant": None, "margin": None, "status": "", "message": ""}
    with threadpool_limits(1):
        try:
            code, res = observe_core({**cfg, "seed": seed, param: value})
        except HypothesisViolation as err:
            row.update(status="hypothesis-violation", message=str(err))
            return row
        except (InconclusiveError, QuadratureError) as err:
            row.update(status="inconclusive", message=str(err))
            return row
        except ValueError as err:
            row.update(status="error", message=str(err))
            return row
    for key in ("sharp_constant", "sharp_upper", "formula_constant", "margin"):
        if res.get(key) is not None:
            row[key] = float(res[key])
    row["status"] = {EXIT_OK: "pass" if row["formula_constant"] is not None else "complete",
                     EXIT_FAIL: "fail"}[code]
    return row


def row_seed(master, index):
    """Seed of sweep row ``index``, derived from the master seed only."""
    return int(np.random.SeedSequence([int(master), int(index)]).generate_state(1)[0])


def _limit_worker_threads():
    threadpool_limits(1)


def run_sweep(cfg):
    param = cfg["param"]
    if param not in SWEEPABLE:
        raise ValueError(f"parameter {param!r} is not sweepable; choose from {', '.join(SWEEPABLE)}")
    values = [int(v) if param in ("n_modes", "seed") else float(v) for v in cfg["values"]]
    base = {k: v for k, v in cfg.items() if k not in ("values", "param", "figure", "threads", "out", "timings")}
    jobs = [(base, param, v, v if param == "seed" else row_seed(cfg["seed"], i)) for i, v in enumerate(values)]
    threads = int(cfg.get("threads") or 1)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads, initializer=_limit_worker_threads) as pool:
            rows = list(pool.map(_sweep_row, jobs))
    else:
        rows = [_sweep_row(j) for j in jobs]
    statuses = {r["status"] for r in rows}
    code = EXIT_FAIL if "fail" in statuses else EXIT_OK
    return code, {"rows": rows}


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else (repr(r[k]) if isinstance(r[k], float) else r[k]))
                    for k in CSV_COLUMNS})
    return buf.getvalue()


def run_ghost(cfg):
    from .ghost import GhostFunction, measure_interpolation, verify_two_sided

    system = _system(cfg)
    phi = parse_function(cfg["function"], system, cfg["seed"])
    n = int(np.flatnonzero(phi.alpha)[-1]) + 1 if np.any(phi.alpha) else 1
    gf = GhostFunction(system, phi.alpha[:n])
    if cfg["check"] == "two-sided":
        rep = verify_two_sided(gf, float(cfg["T"]), quadrature=bool(cfg["quadrature"]))
        return (EXIT_OK if rep.ok else EXIT_FAIL), rep.to_dict()
    if cfg["check"] == "interpolation":
        seq = _sequence(cfg, system.domain)
        rep = measure_interpolation(gf, seq, n_points=int(cfg["n_points"]), seed=int(cfg["seed"]))
        return EXIT_OK, rep.to_dict()
    raise ValueError(f"unknown ghost check {cfg['check']!r}")


def run_counterexample(cfg):
    from .counterexample import corollary_demo, find_gap

    system = _system(cfg)
    seq = _sequence(cfg, system.domain)
    spec = find_gap(seq, radius_fraction=float(cfg["radius_fraction"]))
    rep = corollary_demo(spec, seq, float(cfg["kappa"]), system, float(cfg["kappa_exp"]))
    return (EXIT_OK if rep.witnessed else EXIT_FAIL), rep.to_dict()


def run_verify(cfg):
    """A fast self-check over every module; each entry reports ``pass`` or ``fail``."""
    from .counterexample import corollary_demo, find_gap
    from .ghost import GhostFunction, eval_gradF, verify_two_sided
    from .observability import gram, sharp_weighted_constant

    rng = np.random.default_rng(cfg["seed"])
    checks = {}
    worst = 0.0
    for bc in ("dirichlet", "neumann", "periodic"):
        s = build_system(Domain(1, 1.0, bc), None, n_modes=50)
        y = np.abs(s.basis.y[:, 0]).astype(float)
        worst = max(worst, float(np.max(np.abs(s.E - (math.pi * y) ** 2) / np.maximum(1.0, s.E))))
    checks["analytic_spectrum"] = {"ok": worst < 1e-12, "max_rel_error": worst}

    pot = PotentialSpec.cosine(tuple(rng.uniform(-2, 2, 2)), period=0.5)
    s = build_system(Domain(1, 1.0, "dirichlet"), pot, n_modes=40)
    rep = eigenvalue_sandwich_check(s)
    checks["sandwich"] = {"ok": rep.ok, "worst": rep.worst}

    s0 = build_system(Domain(1, 1.0, "dirichlet"), None, n_modes=1)
    seq = make_equidistributed(s0.domain, 1.0, 0.1)
    m11 = float(gram(s0, seq).M[0, 0])
    exact = 0.2 + math.sin(0.2 * math.pi) / math.pi
    checks["gram_closed_form"] = {"ok": abs(m11 - exact) < 1e-10, "value": m11}

    phi = SpectralFunction(s, rng.standard_normal(len(s)) * np.exp(-0.1 * np.arange(len(s))))
    conv = verify_conversion(phi, 2.0, 0.5)
    checks["conversion"] = {"ok": conv.holds, "log_slack": conv.log_slack}

    gf = GhostFunction(s, phi.alpha[:8])
    two = verify_two_sided(gf, 1.0, quadrature=False)
    checks["two_sided"] = {"ok": two.ok, **two.to_dict()}
    x = rng.uniform(-0.5, 0.5, (50, 1))
    rel = float(np.linalg.norm(eval_gradF(gf, x, 0.0)[:, -1] - gf.phi_n(x)) / np.linalg.norm(gf.phi_n(x)))
    checks["ghost_identity"] = {"ok": rel < 1e-10, "rel_error": rel}

    sn = build_system(Domain(1, 3.0, "neumann"), None, n_modes=50)
    w = sharp_weighted_constant(gram(sn, make_equidistributed(sn.domain, 1.0, 0.1)), 2.0, 3.0)
    checks["dual"] = {"ok": w.lower <= w.upper and w.gap < 0.05, "lower": w.lower, "upper": w.upper}

    sc = build_system(Domain(1, 1.0, "dirichlet"), None, n_modes=600)
    cseq = make_equidistributed(sc.domain, 1.0, 0.1)
    cr = corollary_demo(find_gap(cseq), cseq, 1.0, sc)
    checks["counterexample"] = {"ok": cr.witnessed, "mass_ratio": cr.mass_ratio, "D_poly": cr.D_poly}
    ok = all(c["ok"] for c in checks.values())
    return (EXIT_OK if ok else EXIT_FAIL), {"checks": checks, "all_ok": ok}


RUNNERS = {"spectrum": run_spectrum, "certify": run_certify, "constants": run_constants, "observe": run_observe,
           "sweep": run_sweep, "ghost": run_ghost, "counterexample": run_counterexample, "verify": run_verify}


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _add_domain(p):
    p.add_argument("--d", type=int, help="dimension, 1 or 2")
    p.add_argument("--L", type=float, help="cube side length")
    p.add_argument("--bc", choices=("dirichlet", "neumann", "periodic"))
    p.add_argument("--potential", help="zero | const:c | cos:a1,a2@period=P,offset=c | cells:lo,hi@seed=s,size=h")
    p.add_argument("--lambda-max", dest="lambda_max", type=float, help="spectral window (overrides --n-modes)")
    p.add_argument("--n-modes", dest="n_modes", type=int)


def _add_seq(p):
    p.add_argument("--G", type=float, help="cell size of the equidistributed sequence")
    p.add_argument("--delta", type=float, help="ball radius")
    p.add_argument("--mode", choices=("centered", "random"))


def _add_observe(p):
    p.add_argument("--subspace", type=int, help="size of the spectral subspace")
    p.add_argument("--class", dest="variant", choices=("A", "B"), help="decay class")
    p.add_argument("--function", help="mode:k | random:n | alpha:a,b,...; tests one function")
    p.add_argument("--kappa", type=float)
    p.add_argument("--D", type=float, help="decay constant D_A or D_B")
    p.add_argument("--N", type=float, help="exponent constant for the formula")
    p.add_argument("--n-trunc", dest="n_trunc", type=int)


def build_parser():
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file with configuration keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker processes for sweeps")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--timings", action="store_true", help="include wall-clock timings in the record")

    parser = argparse.ArgumentParser(prog="uclab", description=__doc__.splitlines()[0], parents=[common],
                                     argument_default=S)
    parser.add_argument("--version", action="version", version=f"uclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], argument_default=S, help="Galerkin eigenvalues")
    _add_domain(p)
    p.add_argument("--count", type=int)

    p = sub.add_parser("certify", parents=[common], argument_default=S, help="decay certificates of one function")
    _add_domain(p)
    p.add_argument("--function")
    p.add_argument("--kappa", type=float)
    p.add_argument("--class", dest="cls", choices=("A", "B", "poly"),
                   help="report one class with its per-mode table (default: all three minima)")
    p.add_argument("--C2", type=float, help="rate for the tail-to-coefficient conversion check")
    p.add_argument("--epsilon", type=float)

    p = sub.add_parser("constants", parents=[common], argument_default=S, help="derived constants")
    p.add_argument("--d", type=int)
    p.add_argument("--G", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--kappa", type=float)
    for name in ("v_inf", "v_plus", "v_minus"):
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=float)
    for name in ("D_A", "D_B", "N_A", "N_B"):
        p.add_argument("--" + name.replace("_", "-"), "--" + name.replace("_", ""), dest=name, type=float)

    p = sub.add_parser("observe", parents=[common], argument_default=S, help="mass ratios and sharp constants")
    _add_domain(p)
    _add_seq(p)
    _add_observe(p)

    p = sub.add_parser("sweep", parents=[common], argument_default=S, help="one parameter sweep to CSV")
    _add_domain(p)
    _add_seq(p)
    _add_observe(p)
    p.add_argument("--param", choices=SWEEPABLE)
    p.add_argument("--values", type=_floats, help="comma-separated values")
    p.add_argument("--no-figure", dest="figure", action="store_false", help="skip the PNG next to the CSV")

    p = sub.add_parser("ghost", parents=[common], argument_default=S, help="ghost-dimension checks")
    _add_domain(p)
    _add_seq(p)
    p.add_argument("--check", choices=("two-sided", "interpolation"))
    p.add_argument("--function")
    p.add_argument("--T", type=float)
    p.add_argument("--no-quadrature", dest="quadrature", action="store_false")
    p.add_argument("--n-points", dest="n_points", type=int)

    p = sub.add_parser("counterexample", parents=[common], argument_default=S, help="bump vanishing on W_δ")
    _add_domain(p)
    _add_seq(p)
    p.add_argument("--kappa", type=float)
    p.add_argument("--radius-fraction", dest="radius_fraction", type=float)
    p.add_argument("--kappa-exp", dest="kappa_exp", type=float)

    sub.add_parser("verify", parents=[common], argument_default=S, help="fast self-check of every module")
    return parser


def resolve_config(ns):
    """Defaults, then the ``--config`` file, then explicit flags."""
    args = vars(ns).copy()
    command = args.pop("command")
    path = args.pop("config", None)
    cfg = {**GLOBAL_DEFAULTS, **DEFAULTS[command]}
    if path:
        loaded = json.loads(Path(path).read_text())
        unknown = set(loaded) - set(cfg) - {"command"}
        if unknown:
            raise ValueError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        cfg.update({k: v for k, v in loaded.items() if k != "command"})
    cfg.update(args)
    if "lambda_max" in args and "n_modes" not in args:
        cfg["n_modes"] = None
    return command, cfg


def _write(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        command, cfg = resolve_config(ns)
    except (ValueError, OSError) as err:
        parser.error(str(err))
    # execution-only keys change neither results nor the record
    run_cfg = {k: v for k, v in cfg.items() if k not in EXECUTION_KEYS}
    record = {"tool": "uclab", "version": __version__, "command": command, "config": run_cfg,
              "config_sha256": config_hash({"command": command, **run_cfg})}
    start = time.perf_counter()
    with threadpool_limits(1):
        try:
            code, result = RUNNERS[command](cfg)
            record["status"] = {EXIT_OK: "pass", EXIT_FAIL: "fail"}[code]
            record["result"] = result
        except HypothesisViolation as err:
            code = EXIT_HYPOTHESIS
            record.update(status="hypothesis-violation", error=str(err), hypothesis=err.hypothesis)
            print(f"uclab: hypothesis violated: {err}", file=sys.stderr)
        except (InconclusiveError, QuadratureError) as err:
            code = EXIT_INCONCLUSIVE
            record.update(status="inconclusive", error=str(err))
            print(f"uclab: inconclusive: {err}", file=sys.stderr)
        except ValueError as err:
            parser.error(str(err))
    if cfg.get("timings"):
        record["timings"] = {"wall_seconds": time.perf_counter() - start}
    if command == "sweep" and "result" in record:
        rows = record["result"]["rows"]
        _write(rows_to_csv(rows), cfg["out"])
        if cfg["out"]:
            out = Path(cfg["out"])
            out.with_suffix(".json").write_text(dumps(record))
            if cfg["figure"] and rows:
                from .plotting import plot_sweep
                plot_sweep(rows, cfg["param"], out.with_suffix(".png"))
    else:
        _write(dumps(record), cfg["out"])
    return code


if __name__ == "__main__":
    sys.exit(main())
