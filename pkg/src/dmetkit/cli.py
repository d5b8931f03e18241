"""Command line driver.

Exit codes: 0 success, 2 non-convergence, 3 violated structural assumption,
4 input/output or parse error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .diagnostics import check_assumptions, nrep_local, nrep_two_fragment
from .errors import AssumptionViolation, ConvergenceFailure, DmetError, InvalidInput, ParseError
from .fock import ManyBodyProblem, solve_sector
from .geometry import FragmentPartition, aufbau_projector
from .io import read_fcidump, read_problem, write_fcidump, write_problem
from .loop import JsonlTelemetry, LoopConfig, dmet_continuation, dmet_solve
from .lowlevel import global_hf
from .models import hubbard_chain
from .perturbation import METHODS, TIGHT_LOOP, derivative_sweep, write_csv

log = logging.getLogger("dmetkit")

EXIT_OK, EXIT_NOCONV, EXIT_ASSUMPTION, EXIT_IO = 0, 2, 3, 4


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def reproducibility(args, config: dict, inputs: list[str]) -> dict:
    import numba
    import scipy

    digests = {}
    for p in inputs:
        try:
            digests[p] = hashlib.sha256(Path(p).read_bytes()).hexdigest()
        except OSError:
            pass
    return {
        "package": "dmetkit", "version": __version__,
        "python": platform.python_version(), "numpy": np.__version__,
        "scipy": scipy.__version__, "numba": numba.__version__,
        "kernels": "numba" if _kernels.USE_NUMBA else "numpy",
        "threads": args.threads, "seed": args.seed, "argv": sys.argv[1:],
        "config": config, "inputs": digests,
        "time": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    raise TypeError(f"cannot serialise {type(obj)}")


def _emit(args, payload: dict):
    text = json.dumps(payload, indent=2, default=_jsonable)
    if getattr(args, "out", None):
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _load(args) -> ManyBodyProblem:
    part = FragmentPartition(_ints(args.fragments)) if getattr(args, "fragments", None) else None
    if getattr(args, "format", "auto") == "fcidump":
        p = read_fcidump(args.problem, partition=part)
    else:
        p = read_problem(args.problem)
        if part is not None:
            p = replace(p, partition=part)
    if getattr(args, "alpha", None) is not None:
        p = p.with_alpha(args.alpha)
    return p


def _need_partition(p: ManyBodyProblem):
    if p.partition is None:
        raise InvalidInput("the problem has no fragment partition; pass --fragments")


def _loop_config(args) -> LoopConfig:
    cfg = LoopConfig()
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, ValueError) as err:
            raise ParseError(f"cannot read config {args.config}: {err}") from None
        known = {f.name for f in fields(LoopConfig)}
        unknown = set(data) - known
        if unknown:
            raise ParseError(f"unknown config keys: {sorted(unknown)}")
        cfg = LoopConfig(**{**asdict(cfg), **data})
    for name in ("beta", "anderson", "tol", "max_iter"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    return cfg


def _strict_check(args, p: ManyBodyProblem) -> dict | None:
    if not getattr(args, "strict", False):
        return None
    rep = check_assumptions(p.h, p.N, p.partition)
    if not rep.ok:
        bad = [k for k, v in rep.flags.items() if not v]
        raise AssumptionViolation(f"structural assumptions fail: {', '.join(bad)}")
    return rep.as_dict()


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args):
    p = _load(args)
    _need_partition(p)
    cfg = _loop_config(args)
    _strict_check(args, p)
    tele = JsonlTelemetry(args.telemetry) if args.telemetry else None
    try:
        if args.ramp:
            grid = np.linspace(0.0, p.alpha, args.ramp + 1)[1:]
            st = dmet_continuation(p, grid, cfg, telemetry=tele)[-1]
        else:
            st = dmet_solve(p, cfg, telemetry=tele)
    finally:
        if tele:
            tele.close()
    return {
        "command": "solve", "alpha": p.alpha, "converged": st.converged,
        "iterations": st.iterations, "residual": st.residual, "mu": st.mu,
        "energy_hf_of_D": st.energy_hf, "impurity_energies": st.energies_imp,
        "P_blocks": p.partition.blocks(st.P), "D": st.D,
    }, asdict(cfg)


def cmd_sweep(args):
    p = _load(args)
    _need_partition(p)
    methods = args.methods.split(",") if args.methods else list(METHODS)
    recs = derivative_sweep(p, _floats(args.alphas), methods, args.step1, args.step2, TIGHT_LOOP)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            write_csv(recs, fh)
    failed = [asdict(r) for r in recs if r.status != "ok"]
    return {"command": "sweep", "records": len(recs), "csv": args.csv, "failures": failed,
            "rows": None if args.csv else [asdict(r) for r in recs]}, {
        **asdict(TIGHT_LOOP), "step_first": args.step1, "step_second": args.step2}


def cmd_check(args):
    p = _load(args)
    _need_partition(p)
    rep = check_assumptions(p.h, p.N, p.partition)
    if args.strict and not rep.ok:
        bad = [k for k, v in rep.flags.items() if not v]
        _emit(args, {"command": "check", "report": rep.as_dict()})
        raise AssumptionViolation(f"structural assumptions fail: {', '.join(bad)}")
    return {"command": "check", "report": rep.as_dict()}, rep.thresholds


def cmd_nrep(args):
    if args.blocks:
        try:
            P = np.loadtxt(args.blocks, ndmin=2)
        except (OSError, ValueError) as err:
            raise ParseError(f"cannot read block density {args.blocks}: {err}") from None
        if not args.fragments:
            raise InvalidInput("--fragments is required with --blocks")
        part = FragmentPartition(_ints(args.fragments))
        v = nrep_two_fragment(P, part)
        if args.witness and v.witness is not None:
            np.savetxt(args.witness, v.witness)
        return {"command": "nrep", "mode": "two-fragment", "representable": v.representable,
                "reason": v.reason, "fractional_1": v.fractional_1,
                "fractional_2": v.fractional_2, "witness": v.witness}, {}
    p = _load(args)
    _need_partition(p)
    D0, _ = aufbau_projector(p.h, p.N)
    r = nrep_local(D0, p.partition)
    if args.strict and not r.surjective:
        raise AssumptionViolation("block map is not onto the constraint space at D0")
    return {"command": "nrep", "mode": "local", **asdict(r)}, {}


def cmd_fci(args):
    p = _load(args)
    s = solve_sector(p)
    return {"command": "fci", "alpha": p.alpha, "energy": s.energy + p.constant, "gap": s.gap,
            "rdm1": s.rdm1}, {}


def cmd_hf(args):
    p = _load(args)
    r = global_hf(p, tol=args.tol or 1e-10, damping=args.damping)
    return {"command": "hf", "alpha": p.alpha, "energy": r.energy + p.constant, "gap": r.gap,
            "iterations": r.iterations, "residual": r.residual, "D": r.D}, {}


def cmd_export(args):
    p = _load(args)
    if args.to == "fcidump":
        write_fcidump(p, args.dest)
    else:
        write_problem(p, args.dest)
    return {"command": "export", "to": args.to, "dest": args.dest}, {}


def cmd_model(args):
    p = hubbard_chain(args.L, args.N, args.t, args.U, args.periodic, args.fragment_size,
                      args.alpha if args.alpha is not None else 1.0)
    write_problem(p, args.dest)
    return {"command": "model", "dest": args.dest, "name": p.name}, {}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dmetkit", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="count", default=0)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="cap on compiled-kernel threads")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", help="write the JSON report here instead of stdout")
    common.add_argument("--config", help="JSON file with loop settings")
    common.add_argument("--strict", action="store_true",
                        help="exit with code 3 when a structural assumption fails")
    prob = argparse.ArgumentParser(add_help=False)
    prob.add_argument("problem", help="native problem file or FCIDUMP")
    prob.add_argument("--format", choices=("auto", "native", "fcidump"), default="auto")
    prob.add_argument("--fragments", help="fragment sizes, e.g. 2,2,2,2")
    prob.add_argument("--alpha", type=float, default=None, help="coupling strength override")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", parents=[common, prob], help="embedding fixed point")
    s.add_argument("--beta", type=float)
    s.add_argument("--anderson", type=int)
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iter", dest="max_iter", type=int)
    s.add_argument("--telemetry", help="JSON-lines file for per-iteration records")
    s.add_argument("--ramp", type=int, default=0,
                   help="reach alpha through this many warm-started continuation steps")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sweep", parents=[common, prob], help="densities and derivatives along alpha")
    s.add_argument("--alphas", required=True, help="comma separated couplings")
    s.add_argument("--methods", help="subset of dmet,hf,fci")
    s.add_argument("--step1", type=float, default=1e-4)
    s.add_argument("--step2", type=float, default=1e-3)
    s.add_argument("--csv", help="long-format CSV output")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("check", parents=[common, prob], help="structural assumptions at alpha=0")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("nrep", parents=[common], help="representability tests")
    s.add_argument("problem", nargs="?")
    s.add_argument("--format", choices=("auto", "native", "fcidump"), default="auto")
    s.add_argument("--fragments")
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--blocks", help="text file with a block-diagonal density (two fragments)")
    s.add_argument("--witness", help="write the projector witness here")
    s.set_defaults(func=cmd_nrep)

    s = sub.add_parser("fci", parents=[common, prob], help="exact ground state")
    s.set_defaults(func=cmd_fci)

    s = sub.add_parser("hf", parents=[common, prob], help="Hartree-Fock ground state")
    s.add_argument("--tol", type=float)
    s.add_argument("--damping", type=float, default=0.0)
    s.set_defaults(func=cmd_hf)

    s = sub.add_parser("export", parents=[common, prob], help="convert between formats")
    s.add_argument("--to", choices=("native", "fcidump"), required=True)
    s.add_argument("dest")
    s.set_defaults(func=cmd_export)

    s = sub.add_parser("model", parents=[common], help="write a lattice model problem file")
    s.add_argument("--L", type=int, required=True)
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--t", type=float, default=1.0)
    s.add_argument("--U", type=float, default=0.0)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--periodic", action="store_true")
    s.add_argument("--fragment-size", dest="fragment_size", type=int, default=2)
    s.add_argument("dest")
    s.set_defaults(func=cmd_model)
    return ap


def _set_threads(n: int | None):
    if not n:
        return
    try:
        import numba

        numba.set_num_threads(max(1, min(n, numba.config.NUMBA_NUM_THREADS)))
    except (ImportError, ValueError):
        pass


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    _set_threads(args.threads)
    np.random.seed(args.seed)
    inputs = [x for x in (getattr(args, "problem", None), getattr(args, "blocks", None)) if x]
    try:
        payload, config = args.func(args)
    except (ParseError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    except AssumptionViolation as err:
        print(f"assumption violated: {err}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except ConvergenceFailure as err:
        print(f"not converged: {err}", file=sys.stderr)
        return EXIT_NOCONV
    except (InvalidInput, DmetError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_IO
    payload["reproducibility"] = reproducibility(args, config, inputs)
    _emit(args, payload)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
