"""Batch experiment runner.

Every subcommand writes one JSON report; timestamps go to a sidecar
``<out>.timing.json`` so the report itself is byte-identical across reruns.
Exit codes: 0 conformant, 2 bad input, 3 solver or verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .constructions import (
    FHConfig,
    MixingWitnessSpec,
    StageInfeasible,
    WitnessFailed,
    build_fh_vector,
    build_mixing_witness,
    build_periodic_vector,
    build_schedule,
    fh_from_json,
    verify_fh,
    verify_mixing,
    verify_periodic,
)
from .dynamics import (
    DerivativeEval,
    DerivSquare,
    DiagnosticsConfig,
    NoClosedForm,
    SelfTimesDeriv,
    TranslationEval,
    TwoTranslate,
    ZeroNodeError,
    orbit,
    orbit_to_csv,
)
from .fnspace import (
    DegreeBudgetExceeded,
    FnSpecError,
    PeriodicPoly,
    TaylorPoly,
    fn_from_json,
    fn_to_json,
    parse_complex,
    parse_fnspec,
    translate,
)
from .obstructions import (
    IdentityViolated,
    LogTaylor,
    PersistenceViolated,
    derivative_zero_persistence,
    eval0_decay,
    growth_profile,
    hurwitz_track,
    invariance_check,
    log_taylor_seminorm,
)
from .runge import SolverError
from .topology import Disk, LayoutInfeasible, SampleGrid, ZeroNearContour

EXIT_OK, EXIT_INPUT, EXIT_FAIL = 0, 2, 3

BAD_INPUT = (FnSpecError, LayoutInfeasible, ZeroNodeError, ValueError, TypeError, NoClosedForm)
FAILURE = (SolverError, DegreeBudgetExceeded, ZeroNearContour, IdentityViolated,
           PersistenceViolated, AssertionError)


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# plumbing


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=1) + "\n"


def _num(x) -> float:
    return float(x)  # accepts the "inf"/"-inf"/"nan" strings _clean writes


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def make_report(experiment: str, inputs: dict, outputs: dict, conformance: bool,
                seed: int | None = None) -> dict:
    return {"experiment": experiment, "inputs": inputs, "outputs": outputs,
            "conformance": bool(conformance), "seed": seed, "tool_version": __version__}


def emit(report: dict, out: str | None, started: float) -> None:
    text = dumps(report)
    timing = {"started_utc": datetime.fromtimestamp(started, timezone.utc).isoformat(),
              "runtime_s": time.time() - started}
    if out:
        atomic_write(out, text)
        atomic_write(out + ".timing.json", json.dumps(timing, indent=1) + "\n")
    else:
        sys.stdout.write(text)


def parse_disk(text: str) -> Disk:
    """``cx,cy,r`` or ``center,r`` with a complex center."""
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 3:
            return Disk(complex(float(parts[0]), float(parts[1])), float(parts[2]))
        if len(parts) == 2:
            return Disk(parse_complex(parts[0]), float(parts[1]))
    except ValueError as exc:
        raise InputError(f"bad disk {text!r}: {exc}") from exc
    raise InputError(f"bad disk {text!r}: expected cx,cy,r")


def parse_pairs(text: str) -> list[tuple[int, int]]:
    try:
        return [tuple(int(x) for x in item.split(",")) for item in text.split(";") if item.strip()]
    except ValueError as exc:
        raise InputError(f"bad pair list {text!r}") from exc


def parse_seed_fn(text: str):
    """fnspec, plus two exact log-domain seeds.

    ``dexp:D`` has ``f^(j)(0) = 2^(-2^j)`` and ``lexp:D`` is the truncated
    exponential with derivatives exactly 1, both for ``j <= D``.
    """
    kind, _, rest = text.partition(":")
    if kind in ("dexp", "lexp"):
        if not rest.strip().isdigit():
            raise FnSpecError(f"expected an integer degree, got {rest!r}", len(kind) + 1)
        if kind == "lexp":
            return LogTaylor.truncated_exp(int(rest))
        return LogTaylor.from_log2([-(2.0**j) for j in range(int(rest) + 1)])
    return parse_fnspec(text)


def _map_from(name: str, a: str | None, b: str | None):
    maps = {"translation-eval": TranslationEval, "derivative-eval": DerivativeEval,
            "deriv-square": DerivSquare, "self-times-deriv": SelfTimesDeriv}
    if name == "two-translate":
        if a is None or b is None:
            raise InputError("two-translate needs --a and --b")
        return TwoTranslate(parse_complex(a), parse_complex(b))
    if name not in maps:
        raise InputError(f"unknown map {name!r}")
    return maps[name]()


def _read_seeds(path: str) -> list[str]:
    with open(path) as fh:
        return [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def _fan_out(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))  # map keeps input order


# ---------------------------------------------------------------------------
# experiments (pure functions of their inputs)


def run_mix(inp: dict) -> tuple[dict, bool]:
    spec = MixingWitnessSpec(parse_fnspec(inp["f"]), parse_fnspec(inp["g"]), inp["eps"],
                             inp["R"], inp["n"])
    w = build_mixing_witness(spec, inp["degree"], SampleGrid(inp["samples"]))
    return {"witness": w.to_json()}, True


def check_mix(inp: dict, out: dict) -> bool:
    spec = MixingWitnessSpec(parse_fnspec(inp["f"]), parse_fnspec(inp["g"]), inp["eps"],
                             inp["R"], inp["n"])
    p = fn_from_json(out["witness"]["p"])
    rs, re_, cn = verify_mixing(p, spec, SampleGrid(inp["samples"]))
    return rs < spec.eps and re_ < spec.eps and abs(cn.logmag) < 1e-6


def _structural_period(v: PeriodicPoly) -> float:
    """Coefficient drift after ``n`` unit translations of ``v``."""
    t = v
    for _ in range(v.period):
        t = translate(t, 1)
    if v.inner is not None:
        # unit shifts only rotate the inner variable; n of them must close up
        return float(abs(t.inner.zmul - v.inner.zmul) + abs(t.inner.shift - v.inner.shift))
    return float(np.max(np.abs(t.array() - v.array())))


def run_periodic(inp: dict) -> tuple[dict, bool]:
    pv = build_periodic_vector(parse_fnspec(inp["g"]), inp["eps"], inp["R"], inp["n"],
                               inp["degree"], SampleGrid(inp["samples"]))
    drift = _structural_period(pv.v)
    return {"vector": pv.to_json(), "structural_drift": drift}, drift <= 1e-12


def check_periodic(inp: dict, out: dict) -> bool:
    v = fn_from_json(out["vector"]["v"])
    rt, rp = verify_periodic(v, parse_fnspec(inp["g"]), inp["R"], SampleGrid(inp["samples"]))
    return rt < inp["eps"] and rp < 1e-6 and _structural_period(v) <= 1e-12


def _fh_config(inp: dict) -> FHConfig:
    return FHConfig(K_max=inp["K_max"], budget=inp["degree"], grids=(inp["samples"],))


def run_fh(inp: dict) -> tuple[dict, bool]:
    sched = build_schedule([tuple(p) for p in inp["pairs"]], inp["horizon"])
    targets = [parse_fnspec(t) for t in inp["targets"]]
    try:
        b = build_fh_vector(sched, targets, inp["J"], config=_fh_config(inp))
    except StageInfeasible as exc:
        if exc.build is None:
            raise
        return {"schedule": sched.to_json(), "build": exc.build.to_json(), "error": str(exc)}, False
    return {"schedule": sched.to_json(), "build": b.to_json()}, b.ok


def check_fh(inp: dict, out: dict) -> bool:
    if "error" in out:
        return False
    return verify_fh(fh_from_json(out["build"])).ok


def run_orbit(inp: dict) -> tuple[dict, bool]:
    pmap = _map_from(inp["map"], inp.get("a"), inp.get("b"))
    diag = DiagnosticsConfig(tuple(parse_disk(d) for d in inp["seminorm_disks"]),
                             tuple(parse_disk(d) for d in inp["zero_disks"]),
                             SampleGrid(inp["samples"]), inp["budget"])
    recs = orbit(pmap, parse_seed_fn(inp["f"]), inp["N"], diag)
    return {"csv": orbit_to_csv(recs),
            "eval0": [[r.eval0.logmag, r.eval0.phase] for r in recs]}, True


def run_deriv_eval(inp: dict) -> tuple[dict, bool]:
    f = parse_seed_fn(inp["f"])
    N, R = inp["N"], inp["R"]
    prof = growth_profile(f, R, N)
    dec = eval0_decay(f, N, R)
    out = {"growth": {"R": R, "values": list(prof.values), "classification": prof.classification,
                      "window": list(prof.window), "truncation": prof.truncation},
           "eval0": {"values": list(dec.values), "envelope": dec.envelope,
                     "envelope_ok": dec.envelope_ok, "log_L": dec.log_L},
           "csv": prof.to_csv(), "eval0_csv": dec.to_csv()}
    ok = dec.envelope_ok is not False
    if isinstance(f, TaylorPoly) and f.coeffs and f.coeffs[0] != 0:
        inv = invariance_check(f, min(N, 10), strict=False)
        out["invariance"] = {"ok": inv.ok, "max_logmag_err": inv.max_logmag_err,
                             "max_phase_err": inv.max_phase_err}
        ok = ok and inv.ok
    if not isinstance(f, LogTaylor):
        # reported only: how far the iterates stay from 0 in ||.||_1
        marg = []
        for r in orbit(DerivativeEval(), f, min(N, f.degree)):
            it = r.iterate
            marg.append(-math.inf if it.scale.is_zero else log_taylor_seminorm(it, 1.0))
        out["log_seminorm_1"] = marg
    return out, ok


def run_two_translate(inp: dict) -> tuple[dict, bool]:
    pmap = _map_from("two-translate", inp["a"], inp["b"])
    g = parse_fnspec(inp["g"])
    fixed = [parse_disk(d) for d in inp["disks"]]
    off = inp.get("staircase")
    disks = (lambda k: [Disk(0, k + off)] + fixed) if off is not None else fixed
    tr = hurwitz_track(pmap, g, disks, inp["K"], SampleGrid(inp["samples"]))
    counts = [[k, [c for _, c in per]] for k, per in tr.steps]
    return {"counts": counts, "crosscheck": [[k, list(c)] for k, c in tr.crosscheck],
            "agrees": tr.agrees(), "csv": tr.to_csv()}, tr.agrees()


def run_persistence(inp: dict) -> tuple[dict, bool]:
    pmap = DerivSquare() if inp["kind"] == "deriv-square" else SelfTimesDeriv()
    rep = derivative_zero_persistence(pmap, parse_fnspec(inp["g"]), parse_complex(inp["z0"]),
                                      inp["N"], strict=False)
    out = {"quantity": rep.quantity, "hypothesis_ok": rep.hypothesis_ok,
           "values": [list(v) for v in rep.values]}
    return out, rep.ok or not rep.hypothesis_ok


RUNNERS = {"mix": run_mix, "periodic": run_periodic, "fh": run_fh, "orbit": run_orbit,
           "obstruct-deriv-eval": run_deriv_eval, "obstruct-two-translate": run_two_translate,
           "obstruct-deriv-square": run_persistence, "obstruct-self-deriv": run_persistence}
CHECKERS = {"mix": check_mix, "periodic": check_periodic, "fh": check_fh}


def _seed_key(inp: dict) -> str:
    return "g" if "g" in inp else "f"


def _batch_item(arg):
    name, inp = arg
    try:
        out, ok = RUNNERS[name](inp)
    except BAD_INPUT + FAILURE as exc:
        return {"inputs": inp, "error": f"{type(exc).__name__}: {exc}"}, False
    return {"inputs": inp, "outputs": out}, ok


def run_experiment(name: str, inp: dict, args) -> int:
    started = time.time()
    seeds_file = getattr(args, "seeds_file", None)
    seed_key = _seed_key(inp)
    try:
        if seeds_file:
            items = [(name, {**inp, seed_key: s}) for s in _read_seeds(seeds_file)]
            results = _fan_out(_batch_item, items, args.workers)
            outputs = {"runs": [r for r, _ in results]}
            ok = all(k for _, k in results)
            report = make_report(name, {**inp, seed_key: None, "seeds": [i[1][seed_key] for i in items]},
                                 outputs, ok, getattr(args, "seed", None))
        else:
            outputs, ok = RUNNERS[name](inp)
            report = make_report(name, inp, outputs, ok, getattr(args, "seed", None))
    except WitnessFailed as exc:
        emit(make_report(name, inp, {"error": str(exc), "partial": exc.report}, False),
             args.out, started)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except BAD_INPUT as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FAILURE as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    emit(report, args.out, started)
    csv_path = getattr(args, "csv", None)
    if csv_path and not seeds_file and "csv" in report["outputs"]:
        with open(csv_path, "w") as fh:
            fh.write(report["outputs"]["csv"])
    return EXIT_OK if report["conformance"] else EXIT_FAIL


# ---------------------------------------------------------------------------
# verify


def verify_report(report: dict) -> bool:
    """Re-check a stored report without re-solving.

    Witness reports are re-verified from their stored functions; analysis
    reports are recomputed (they involve no solver) and must match.
    """
    name, inp, out = report["experiment"], report["inputs"], report["outputs"]
    if "error" in out:
        return False
    if "runs" in out:
        if any("error" in r for r in out["runs"]):
            return False
        fresh = [RUNNERS[name](r["inputs"]) for r in out["runs"]]
        return (all(_same(f, r["outputs"]) for f, r in zip(fresh, out["runs"]))
                and all(ok for _, ok in fresh) and report["conformance"])
    if name in CHECKERS:
        return CHECKERS[name](inp, out) and report["conformance"]
    fresh, ok = RUNNERS[name](inp)
    return _same((fresh, ok), out) and ok == report["conformance"] and ok


def _same(fresh, stored: dict) -> bool:
    return json.loads(dumps(fresh[0])) == stored


def cmd_verify(args) -> int:
    try:
        with open(args.report) as fh:
            report = json.load(fh)
        if report.get("experiment") not in RUNNERS:
            raise InputError(f"unknown experiment {report.get('experiment')!r}")
    except (OSError, json.JSONDecodeError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    try:
        ok = verify_report(report)
    except BAD_INPUT + FAILURE + (KeyError,) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print("conformant" if ok else "NOT conformant")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing


def _common(p, samples: int = 256):
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--samples", type=int, default=samples, help="boundary samples per disk")
    p.add_argument("--seed", type=int, default=None, help="recorded in the report")


def _batch(p):
    p.add_argument("--seeds-file", help="one fnspec per line; runs each as its own experiment")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--csv", help="also write the trace CSV here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hyperpoly", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("mix", help="transitivity witness")
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--degree", type=int, default=96)
    _common(p)

    p = sub.add_parser("periodic", help="periodic vector near g")
    p.add_argument("--g", required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--degree", type=int, default=128)
    _common(p)

    p = sub.add_parser("fh", help="finite stages of a frequently hypercyclic vector")
    p.add_argument("--pairs", required=True, help="n,m;n,m;...")
    p.add_argument("--targets", nargs="+", required=True, help="fnspec of p_1, p_2, ...")
    p.add_argument("--J", type=int, default=3)
    p.add_argument("--horizon", type=int, default=1000)
    p.add_argument("--K-max", dest="K_max", type=int, default=24)
    p.add_argument("--degree", type=int, default=1024)
    _common(p, samples=1024)

    p = sub.add_parser("orbit", help="orbit diagnostics")
    p.add_argument("--map", required=True)
    p.add_argument("--a")
    p.add_argument("--b")
    p.add_argument("--f", required=False)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--seminorm-disk", dest="seminorm_disks", action="append", default=[])
    p.add_argument("--zero-disk", dest="zero_disks", action="append", default=[])
    p.add_argument("--budget", type=int, default=128)
    _common(p)
    _batch(p)

    ob = sub.add_parser("obstruct", help="experiments for the non-hypercyclic maps")
    osub = ob.add_subparsers(dest="kind", required=True)
    p = osub.add_parser("deriv-eval", help="P(f) = f(0) f'")
    p.add_argument("--f")
    p.add_argument("--R", type=float, default=2.0)
    p.add_argument("--N", type=int, required=True)
    _common(p)
    _batch(p)
    p = osub.add_parser("two-translate", help="P(g) = g(z+a) g(z+b)")
    p.add_argument("--g")
    p.add_argument("--a", default="1")
    p.add_argument("--b", default="0")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--disk", dest="disks", action="append", default=[])
    p.add_argument("--staircase", type=float, help="add the disk B(0, k + OFFSET) at step k")
    _common(p)
    _batch(p)
    for kind in ("deriv-square", "self-deriv"):
        p = osub.add_parser(kind)
        p.add_argument("--g")
        p.add_argument("--z0", default="0")
        p.add_argument("--N", type=int, required=True)
        _common(p)
        _batch(p)

    p = sub.add_parser("verify", help="re-verify a stored report")
    p.add_argument("report")
    return ap


def _inputs(args) -> tuple[str, dict]:
    c = args.cmd
    if c == "mix":
        return c, {"f": args.f, "g": args.g, "eps": args.eps, "R": args.R, "n": args.n,
                   "degree": args.degree, "samples": args.samples}
    if c == "periodic":
        return c, {"g": args.g, "eps": args.eps, "R": args.R, "n": args.n,
                   "degree": args.degree, "samples": args.samples}
    if c == "fh":
        return c, {"pairs": [list(p) for p in parse_pairs(args.pairs)], "targets": list(args.targets),
                   "J": args.J, "horizon": args.horizon, "K_max": args.K_max,
                   "degree": args.degree, "samples": args.samples}
    if c == "orbit":
        return c, {"map": args.map, "a": args.a, "b": args.b, "f": args.f, "N": args.N,
                   "seminorm_disks": args.seminorm_disks, "zero_disks": args.zero_disks,
                   "budget": args.budget, "samples": args.samples}
    k = args.kind
    if k == "deriv-eval":
        return "obstruct-deriv-eval", {"f": args.f, "R": args.R, "N": args.N}
    if k == "two-translate":
        return "obstruct-two-translate", {"g": args.g, "a": args.a, "b": args.b, "K": args.K,
                                          "disks": args.disks, "staircase": args.staircase,
                                          "samples": args.samples}
    return f"obstruct-{k}", {"kind": k, "g": args.g, "z0": args.z0, "N": args.N}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.cmd == "verify":
        return cmd_verify(args)
    try:
        name, inp = _inputs(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    key = _seed_key(inp)
    if key in inp and inp[key] is None and not getattr(args, "seeds_file", None):
        print(f"error: --{key} or --seeds-file is required", file=sys.stderr)
        return EXIT_INPUT
    return run_experiment(name, inp, args)


if __name__ == "__main__":
    sys.exit(main())
