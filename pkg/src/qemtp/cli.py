"""Command-line front end: ``qemtp <subcommand> --flag value ...``.

Exit status is 0 on success, 1 when ``compare --max-rmse`` is exceeded,
2 on invalid input and 3 when the variational solver does not converge.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import BACKEND
from .emtp import Waveform
from .errors import ConvergenceError, InvalidParameterError, QemtpError
from .netconfig import load_network
from .pauli import gkd, mapping_error, mlqc_decompose, naive_pauli_decompose
from .simulate import settings_from_network, simulate
from .vqls import OptimizerConfig, circuit_accounting, solve_with_compensation

EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE, EXIT_CONVERGENCE = 0, 1, 2, 3


class UsageError(QemtpError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 itself; route through main so the message format is shared
    def error(self, message):
        raise UsageError(message)


# ---- argument types --------------------------------------------------------

def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be positive and finite, got {text}")
    return value


def _nonneg_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if value < 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be non-negative and finite, got {text}")
    return value


def _dim(text: str) -> int:
    value = _positive_int(text)
    if value < 4 or value > 1024 or value & (value - 1):
        raise argparse.ArgumentTypeError(f"dimension must be a power of two in 4..1024, got {value}")
    return value


def _dims(text: str) -> list[int]:
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("empty dimension list")
    return [_dim(p.strip()) for p in parts]


def _rank(text: str):
    return "full" if text == "full" else _positive_int(text)


def _ranks(text: str) -> list:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("empty R list")
    return [_rank(p) for p in parts]


def _shots(text: str):
    return "exact" if text == "exact" else _positive_int(text)


# ---- helpers ---------------------------------------------------------------

def random_symmetric(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform [0, 1) upper triangle mirrored below the diagonal."""
    u = rng.random((dim, dim))
    return np.triu(u) + np.triu(u, 1).T


def _timed(fn, repeats: int) -> tuple[list[float], object]:
    times, out = [], None
    for _ in range(repeats):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return times, out


def _read_matrix(path) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise InvalidParameterError(f"{path}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise InvalidParameterError(f"{path}: {exc}") from None
    return data


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _rows_to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{x:.9e}" if isinstance(x, float) else x for x in row])
    return buf.getvalue()


# ---- subcommands -----------------------------------------------------------

def cmd_bench_map(args) -> int:
    rng = np.random.default_rng(args.seed)
    header = ["dim", "naive_mean_s", "naive_median_s", "mlqc_mean_s", "mlqc_median_s",
              "naive_error", "mlqc_error", "max_coeff_diff", "speedup"]
    rows = []
    for dim in args.dims:
        g = random_symmetric(dim, rng)
        # warm caches and the allocator so the first repeat is not an outlier
        naive_pauli_decompose(g, symmetric_filter=args.naive_filter)
        mlqc_decompose(g, args.r)
        t_naive, d_naive = _timed(lambda: naive_pauli_decompose(g, symmetric_filter=args.naive_filter),
                                  args.repeats)
        t_mlqc, d_mlqc = _timed(lambda: mlqc_decompose(g, args.r, symmetric_filter=True), args.repeats)
        diff = float(np.max(np.abs(d_naive.dense_coefficients() - d_mlqc.dense_coefficients())))
        m_naive, m_mlqc = statistics.fmean(t_naive), statistics.fmean(t_mlqc)
        rows.append([dim, m_naive, statistics.median(t_naive), m_mlqc, statistics.median(t_mlqc),
                     mapping_error(g, d_naive), mapping_error(g, d_mlqc), diff, m_naive / m_mlqc])
    _emit(_rows_to_csv(header, rows), args.out)
    return EXIT_OK


def cmd_r_sweep(args) -> int:
    rng = np.random.default_rng(args.seed)
    g = random_symmetric(args.dim, rng)
    s = gkd(g).singular_values
    max_rank = len(s)
    ranks = args.r_values or list(range(1, max_rank + 1))
    for r in ranks:
        if r != "full" and r > max_rank:
            raise InvalidParameterError(f"R={r} exceeds the maximum rank {max_rank} at dim {args.dim}")
    norm = float(np.linalg.norm(g))
    rows = []
    for r in ranks:
        times, d = _timed(lambda: mlqc_decompose(g, r), args.repeats)
        used = d.rank
        tail = float(np.sqrt(np.sum(s[used:] ** 2)) / norm)
        rows.append([r, used, statistics.fmean(times), mapping_error(g, d), tail])
    _emit(_rows_to_csv(["R", "rank_used", "mean_s", "error", "tail_norm"], rows), args.out)
    return EXIT_OK


def cmd_decompose(args) -> int:
    g = _read_matrix(args.input)
    if args.method == "naive":
        if args.r != "full":
            raise InvalidParameterError("--r applies to --method mlqc only")
        d = naive_pauli_decompose(g, symmetric_filter=args.symmetric)
    else:
        d = mlqc_decompose(g, args.r, symmetric_filter=args.symmetric)
    _emit(d.to_text(), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    g = _read_matrix(args.matrix)
    i = _read_matrix(args.rhs).reshape(-1)
    if g.shape[0] != g.shape[1] or g.shape[0] != i.size:
        raise InvalidParameterError(f"matrix is {g.shape[0]}x{g.shape[1]} but rhs has {i.size} entries")
    cfg = OptimizerConfig(learning_rate=args.learning_rate, max_iterations=args.max_iterations,
                          rng_seed=args.seed)
    sol = solve_with_compensation(g, i, args.eps, cfg, layers=args.layers, mode=args.shots,
                                  max_rounds=args.max_rounds, seed=args.seed)
    if args.out is not None:
        np.savetxt(args.out, sol.v_physical.reshape(-1, 1), fmt="%.15e", delimiter=",")
    summary = {
        "v": sol.v_physical.tolist(), "residual": sol.residual, "rounds": sol.compensation_rounds,
        "iterations": sol.iterations, "residual_trace": sol.residual_trace,
    }
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    network = load_network(args.config)
    overrides = {"eps": args.eps, "layers": args.layers, "seed": args.seed, "t_end": args.t_end,
                 "window_start": args.window_start, "dt": args.dt, "max_rounds": args.max_rounds}
    if args.shots is not None:
        overrides["mode"] = args.shots
    settings = settings_from_network(network, **overrides)
    wave, meta = simulate(network, args.engine, settings)
    meta["config"] = str(args.config)
    out = Path(args.out)
    wave.to_csv(out)
    out.with_suffix(".json").write_text(json.dumps(meta, indent=2, default=_json_default) + "\n")
    if args.engine == "qemtp":
        sys.stdout.write(f"steps {meta['steps']}  max_rel_err {meta['max_rel_err']:.3e}  "
                         f"max_residual {meta['max_residual']:.3e}  rounds_max {meta['rounds_max']}\n")
    return EXIT_OK


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def compare_waveforms(a: Waveform, b: Waveform, base: str = "max") -> dict:
    """RMSE of ``b`` against ``a`` over shared channels.

    With ``base="max"`` every channel is divided by ``max|a|`` of that
    channel first (per-unit); ``base="none"`` keeps physical units.
    """
    if a.time.shape != b.time.shape or not np.allclose(a.time, b.time, rtol=0, atol=1e-12):
        raise InvalidParameterError("time axes differ")
    shared = [k for k in a.channels if k in b.channels and k != "rel_err"]
    if not shared:
        raise InvalidParameterError("no shared channels")
    per, sq = {}, []
    for name in shared:
        scale = 1.0
        if base == "max":
            peak = float(np.max(np.abs(a[name])))
            scale = peak if peak > 0 else 1.0
        d = (b[name] - a[name]) / scale
        sq.append(d**2)
        per[name] = {"rmse": float(np.sqrt(np.mean(d**2))), "max_abs": float(np.max(np.abs(d))), "base": scale}
    rel = [float(np.max(w["rel_err"])) for w in (a, b) if "rel_err" in w.channels]
    return {
        "rmse": float(np.sqrt(np.mean(np.concatenate(sq)))),
        "max_rel_err": max(rel) if rel else None,
        "channels": per,
    }


def cmd_compare(args) -> int:
    result = compare_waveforms(Waveform.from_csv(args.a), Waveform.from_csv(args.b), args.base)
    sys.stdout.write(json.dumps(result, indent=2) + "\n")
    if args.max_rmse is not None and result["rmse"] > args.max_rmse:
        sys.stderr.write(f"qemtp: rmse {result['rmse']:.3e} exceeds {args.max_rmse:g}\n")
        return EXIT_THRESHOLD
    return EXIT_OK


# ---- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qemtp", description="Pauli mapping benchmarks and variational EMT simulation.")
    p.add_argument("--version", action="version", version=f"qemtp {__version__} ({BACKEND} kernels)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("bench-map", help="time naive vs MLQC Pauli mapping on random symmetric matrices")
    b.add_argument("--dims", type=_dims, default=[4, 8, 16, 32, 64, 128, 256])
    b.add_argument("--repeats", type=_positive_int, default=3)
    b.add_argument("--r", type=_rank, default="full", help="Kronecker rank R or 'full'")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--naive-filter", action="store_true",
                   help="let the naive baseline skip odd-Y strings too (default: full trace mapping)")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench_map)

    r = sub.add_parser("r-sweep", help="MLQC reconstruction error against the Kronecker rank R")
    r.add_argument("--dim", type=_dim, default=512)
    r.add_argument("--r-values", type=_ranks, default=None, help="comma list, default 1..max")
    r.add_argument("--repeats", type=_positive_int, default=1)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out")
    r.set_defaults(func=cmd_r_sweep)

    d = sub.add_parser("decompose", help="Pauli decomposition of a CSV matrix")
    d.add_argument("--in", dest="input", required=True)
    d.add_argument("--method", choices=("naive", "mlqc"), default="mlqc")
    d.add_argument("--r", type=_rank, default="full")
    d.add_argument("--symmetric", action="store_true", help="drop odd-Y strings")
    d.add_argument("--out")
    d.set_defaults(func=cmd_decompose)

    s = sub.add_parser("solve", help="solve G v = i with VQLS and error compensation")
    s.add_argument("--matrix", required=True)
    s.add_argument("--rhs", required=True)
    _solver_flags(s, eps=1e-7, layers=3)
    s.add_argument("--learning-rate", type=_nonneg_float, default=0.1)
    s.add_argument("--max-iterations", type=_positive_int, default=2000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)
    s.set_defaults(shots="exact", seed=0, max_rounds=10)

    m = sub.add_parser("simulate", help="transient run of a network config")
    m.add_argument("--config", required=True)
    m.add_argument("--engine", choices=("classical", "qemtp"), default="classical")
    m.add_argument("--out", required=True)
    _solver_flags(m, eps=None, layers=None)
    m.add_argument("--dt", type=_positive_float)
    m.add_argument("--t-end", type=_positive_float)
    m.add_argument("--window-start", type=_nonneg_float)
    m.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="RMSE between two waveform CSV files")
    c.add_argument("--a", required=True)
    c.add_argument("--b", required=True)
    c.add_argument("--base", choices=("max", "none"), default="max", help="per-unit base per channel")
    c.add_argument("--max-rmse", type=_nonneg_float)
    c.set_defaults(func=cmd_compare)
    return p


def _solver_flags(p, *, eps, layers):
    p.add_argument("--eps", type=_positive_float, default=eps)
    p.add_argument("--layers", type=_positive_int, default=layers)
    p.add_argument("--shots", type=_shots, default=None, help="shot count or 'exact'")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--max-rounds", type=_nonneg_int, default=None)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConvergenceError as exc:
        sys.stderr.write(f"qemtp: did not converge: {exc}\n")
        return EXIT_CONVERGENCE
    except (QemtpError, ValueError) as exc:
        sys.stderr.write(f"qemtp: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
