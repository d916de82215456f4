"""Command-line front end.

Commands: ``constants``, ``estimate``, ``mslca``, ``influence``, ``test``,
``simulate`` and ``generate``. Input data are CSV files with a header row;
single results are written as JSON, simulation tables as CSV. Matrices are
row-major nested lists; eigenvectors and canonical directions are columns.

Exit codes: 0 success, 1 numerical or statistical failure, 2 I/O or ingest
failure (argparse usage errors also exit with 2).
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .blocks import BlockStructure
from .datagen import Contamination, correlated_model, null_model, sample
from .exceptions import InputError, MslcaError
from .inference import NORMALIZERS, noncorrelation_test
from .influence import InfluenceContext, if_alpha, if_bound, if_rho, if_scatter, if_t
from .loss import compute_constants, tune_loss
from .mslca import solve_mslca
from .s_estimator import Dataset, SConfig, s_estimate

THREADS_ENV = "ROBUST_MSLCA_THREADS"
LEVELS = (0.01, 0.05, 0.10)


class IngestError(Exception):
    """Unreadable or malformed input file."""


@dataclass
class RunConfig:
    command: str
    input: str = None
    out: str = None
    blocks: list = None
    breakdown: float = 0.5
    seed: int = 0
    subsamples: int = 500
    family: str = "gaussian"
    df: float = None
    contamination: tuple = None
    contamination_kind: str = "point"
    rho: float = None
    reps: int = None
    n: int = None
    mode: str = None
    threads: int = 1
    dim: int = None
    model: str = None
    x: list = None
    j: int = 1
    what: str = "T"
    bound: bool = False
    normalizer: str = "variance"
    kappa_raw: bool = False


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _int_list(flag):
    def conv(text):
        try:
            vals = [int(tok) for tok in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects comma-separated integers, got {text!r}")
        if any(v < 1 for v in vals) or len(vals) < 2:
            raise argparse.ArgumentTypeError(f"{flag} needs at least two positive integers")
        return vals
    conv.__name__ = flag
    return conv


def _float_list(flag):
    def conv(text):
        try:
            vals = [float(tok) for tok in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects comma-separated numbers, got {text!r}")
        if not all(math.isfinite(v) for v in vals):
            raise argparse.ArgumentTypeError(f"{flag} values must be finite")
        return vals
    conv.__name__ = flag
    return conv


def _contamination(text):
    eps, _, path = text.partition(",")
    try:
        eps = float(eps)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--contaminate expects EPS,POINT_FILE, got {text!r}")
    if not path:
        raise argparse.ArgumentTypeError("--contaminate expects EPS,POINT_FILE")
    return eps, path


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser():
    try:
        default_threads = max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        default_threads = 1
    p = _Parser(prog="robust-mslca", description="Robust multiple-set linear canonical analysis.")
    sub = p.add_subparsers(dest="command", metavar="command", parser_class=_Parser)

    def common(sp, blocks_required=False, needs_input=False):
        if needs_input:
            sp.add_argument("--input", required=True, help="CSV file with a header row")
        sp.add_argument("--breakdown", type=float, default=0.5)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--subsamples", type=_positive_int, default=500,
                        help="elementary subsets drawn by the S-estimator")
        if blocks_required:
            sp.add_argument("--blocks", type=_int_list("--blocks"), required=True,
                            help="block dimensions, e.g. 2,3,4")

    sp = sub.add_parser("constants", help="loss tuning and asymptotic constants")
    sp.add_argument("--dim", type=_positive_int, required=True)
    sp.add_argument("--breakdown", type=float, default=0.5)
    sp.add_argument("--out")

    sp = sub.add_parser("estimate", help="S-estimate of location and scatter")
    common(sp, needs_input=True)
    sp.add_argument("--out")

    sp = sub.add_parser("mslca", help="robust MSLCA of a data set")
    common(sp, blocks_required=True, needs_input=True)
    sp.add_argument("--out")

    sp = sub.add_parser("influence", help="influence functions at a model")
    sp.add_argument("--model", required=True, help="JSON with V, blocks and optional breakdown")
    sp.add_argument("--x", type=_float_list("--x"))
    sp.add_argument("--j", type=_positive_int, default=1, help="1-based canonical index")
    sp.add_argument("--what", choices=("T", "rho", "alpha", "V"), default="T")
    sp.add_argument("--bound", action="store_true", help="print the sup-norm ceiling of IF(T)")
    sp.add_argument("--out")

    sp = sub.add_parser("test", help="robust test of mutual non-correlation")
    common(sp, blocks_required=True, needs_input=True)
    sp.add_argument("--normalizer", choices=NORMALIZERS, default="variance")
    sp.add_argument("--kappa-raw", action="store_true",
                    help="evaluate the normalizer on raw rows, not standardized residuals")
    sp.add_argument("--out")

    sp = sub.add_parser("simulate", help="Monte Carlo size or power of the test")
    common(sp, blocks_required=True)
    sp.add_argument("--mode", choices=("null", "power"), required=True)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--reps", type=_positive_int, required=True)
    sp.add_argument("--rho", type=float, default=0.8,
                    help="canonical correlation between blocks 1 and 2 in power mode")
    sp.add_argument("--normalizer", choices=NORMALIZERS, default="variance")
    sp.add_argument("--threads", type=_positive_int, default=default_threads,
                    help=f"worker threads (default from ${THREADS_ENV}, else 1)")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("generate", help="sample a data set")
    sp.add_argument("--blocks", type=_int_list("--blocks"), required=True)
    sp.add_argument("--family", choices=("gaussian", "student"), default="gaussian")
    sp.add_argument("--df", type=float)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--rho", type=float, help="correlation between blocks 1 and 2 (default 0)")
    sp.add_argument("--contaminate", type=_contamination, metavar="EPS,POINT_FILE")
    sp.add_argument("--contamination-kind", choices=("point", "diffuse"), default="point")
    sp.add_argument("--out", required=True)
    return p


def parse_args(argv):
    """Parse ``argv`` into a :class:`RunConfig`; usage errors exit with status 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        parser.print_help(sys.stderr)
        parser.exit(2)
    args = vars(ns)
    if args.get("family") == "student" and args.get("df") is None:
        parser.error("argument --df: required for --family student")
    if args["command"] == "influence" and not args["bound"] and args.get("x") is None:
        parser.error("argument --x: required unless --bound is given")
    if "contaminate" in args:
        args["contamination"] = args.pop("contaminate")
    known = set(RunConfig.__dataclass_fields__)
    return RunConfig(**{k: v for k, v in args.items() if k in known})


# ---------------------------------------------------------------- I/O helpers

def _num(x):
    return format(float(x), ".17g")


def _to_json(obj):
    """JSON text with every float printed to 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return _to_json(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_to_json(v) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise ValueError("non-finite number in output")
        return _num(obj)
    if obj is None:
        return "null"
    return json.dumps(obj)


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def read_csv(path):
    """Numeric CSV with a header row; rejects ragged rows, NaN and infinities."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc.strerror}") from exc
    rows = []
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IngestError(f"{path}: empty file")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise IngestError(f"{path}, row {lineno}: expected {len(header)} fields, "
                                  f"got {len(rec)}")
            try:
                vals = [float(tok) for tok in rec]
            except ValueError:
                raise IngestError(f"{path}, row {lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise IngestError(f"{path}, row {lineno}: NaN or infinite value")
            rows.append(vals)
    if not rows:
        raise IngestError(f"{path}: no data rows")
    return np.array(rows)


def write_csv(X, path):
    q = X.shape[1]
    lines = [",".join(f"x{i + 1}" for i in range(q))]
    lines += [",".join(_num(v) for v in row) for row in X]
    _emit("\n".join(lines) + "\n", path)


def _read_point(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc.strerror}") from exc
    toks = text.replace(",", " ").split()
    try:
        vals = [float(t) for t in toks]
    except ValueError:
        raise IngestError(f"{path}: contamination point must be numbers") from None
    if not vals or not all(math.isfinite(v) for v in vals):
        raise IngestError(f"{path}: contamination point must be finite numbers")
    return np.array(vals)


def _read_model(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IngestError(f"cannot open {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise IngestError(f"{path}: invalid JSON ({exc.msg})") from exc
    try:
        V = np.array(raw["V"], dtype=float)
        blocks = BlockStructure(tuple(raw["blocks"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise IngestError(f"{path}: model needs 'V' (matrix) and 'blocks' (list)") from exc
    return V, blocks, float(raw.get("breakdown", 0.5))


def _dataset(cfg, need_blocks):
    X = read_csv(cfg.input)
    blocks = None
    if need_blocks:
        if sum(cfg.blocks) != X.shape[1]:
            raise IngestError(f"--blocks sum to {sum(cfg.blocks)} but {cfg.input} has "
                              f"{X.shape[1]} columns")
        blocks = BlockStructure(tuple(cfg.blocks))
    return Dataset(X, blocks)


def _sconfig(cfg, seed=None):
    return SConfig(n_subsamples=cfg.subsamples, seed=cfg.seed if seed is None else seed)


# ------------------------------------------------------------------ commands

def _cmd_constants(cfg):
    spec = tune_loss(cfg.dim, cfg.breakdown)
    k = compute_constants(spec)
    _emit(_to_json({"c": spec.cutoff, "b0": spec.b0, "gamma1": k.gamma1,
                    "gamma2": k.gamma2, "beta3": k.beta3}) + "\n", cfg.out)


def _estimate_dict(est):
    return {"mu": est.mu, "V": est.V, "det": est.det, "log_det": est.log_det,
            "iterations": est.iterations, "converged": est.converged,
            "constraint_residual": est.constraint_residual}


def _cmd_estimate(cfg):
    data = _dataset(cfg, need_blocks=False)
    est = s_estimate(data, tune_loss(data.q, cfg.breakdown), _sconfig(cfg))
    _emit(_to_json(_estimate_dict(est)) + "\n", cfg.out)


def _cmd_mslca(cfg):
    data = _dataset(cfg, need_blocks=True)
    est = s_estimate(data, tune_loss(data.q, cfg.breakdown), _sconfig(cfg))
    sol = solve_mslca(est.V, data.blocks)
    _emit(_to_json({"phi": sol.phi, "t_matrix": sol.t_matrix, "rho": sol.rho,
                    "beta": sol.beta, "alpha": sol.alpha, "estimate": _estimate_dict(est)})
          + "\n", cfg.out)


def _cmd_influence(cfg):
    V, blocks, breakdown = _read_model(cfg.model)
    ctx = InfluenceContext.from_model(V, blocks, breakdown=breakdown)
    if cfg.bound:
        _emit(_to_json({"bound": if_bound(ctx)}) + "\n", cfg.out)
        return
    x = np.array(cfg.x)
    if x.shape != (blocks.q,):
        raise InputError(f"--x has {x.size} values but the model has dimension {blocks.q}")
    j = cfg.j - 1
    fn = {"T": lambda: if_t(x, ctx), "V": lambda: if_scatter(x, ctx),
          "rho": lambda: if_rho(x, j, ctx), "alpha": lambda: if_alpha(x, j, ctx)}[cfg.what]
    out = {"what": cfg.what, "value": fn()}
    if cfg.what in ("rho", "alpha"):
        out["j"] = cfg.j
    _emit(_to_json(out) + "\n", cfg.out)


def _result_dict(res):
    return {"statistic": res.statistic, "s_tilde": res.s_tilde, "kappa0_hat": res.kappa0_hat,
            "df": res.df, "p_value": res.p_value, "n": res.n}


def _cmd_test(cfg):
    data = _dataset(cfg, need_blocks=True)
    res = noncorrelation_test(data, tune_loss(data.q, cfg.breakdown), _sconfig(cfg),
                              normalizer=cfg.normalizer, raw=cfg.kappa_raw)
    _emit(_to_json(_result_dict(res)) + "\n", cfg.out)


def replicate_seeds(seed, rep):
    """Data and estimator seeds for replicate ``rep``."""
    s = np.random.SeedSequence([int(seed) % 2 ** 64, int(rep)]).generate_state(2, dtype=np.uint64)
    return int(s[0]), int(s[1])


def _cmd_simulate(cfg):
    blocks = BlockStructure(tuple(cfg.blocks))
    model = null_model(blocks) if cfg.mode == "null" else correlated_model(blocks, cfg.rho)
    spec = tune_loss(blocks.q, cfg.breakdown)

    def one(rep):
        data_seed, est_seed = replicate_seeds(cfg.seed, rep)
        res = noncorrelation_test(sample(model, cfg.n, data_seed), spec,
                                  _sconfig(cfg, est_seed), normalizer=cfg.normalizer)
        return res.statistic, res.p_value

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            results = list(pool.map(one, range(cfg.reps)))
    else:
        results = [one(r) for r in range(cfg.reps)]

    head = "replicate,statistic,p_value," + ",".join(f"reject_{a:.2f}" for a in LEVELS)
    lines = [head]
    for rep, (stat, p) in enumerate(results):
        flags = ",".join(str(int(p < a)) for a in LEVELS)
        lines.append(f"{rep},{_num(stat)},{_num(p)},{flags}")
    p_all = np.array([p for _, p in results])
    rates = ",".join(_num(np.mean(p_all < a)) for a in LEVELS)
    lines.append(f"summary,,,{rates}")
    _emit("\n".join(lines) + "\n", cfg.out)


def _cmd_generate(cfg):
    blocks = BlockStructure(tuple(cfg.blocks))
    if cfg.rho:
        model = correlated_model(blocks, cfg.rho, family=cfg.family, df=cfg.df)
    else:
        model = null_model(blocks, cfg.family, cfg.df)
    if cfg.contamination is not None:
        eps, path = cfg.contamination
        model = replace(model, contamination=Contamination(eps, _read_point(path),
                                                           cfg.contamination_kind))
    write_csv(sample(model, cfg.n, cfg.seed).rows, cfg.out)


COMMANDS = {"constants": _cmd_constants, "estimate": _cmd_estimate, "mslca": _cmd_mslca,
            "influence": _cmd_influence, "test": _cmd_test, "simulate": _cmd_simulate,
            "generate": _cmd_generate}


def run(cfg):
    """Execute a parsed command; returns the process exit code."""
    try:
        COMMANDS[cfg.command](cfg)
    except MslcaError as exc:
        print(f"robust-mslca {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (IngestError, OSError) as exc:
        print(f"robust-mslca {cfg.command}: input/output error: {exc}", file=sys.stderr)
        return 2
    return 0


def main(argv=None):
    return run(parse_args(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    sys.exit(main())
