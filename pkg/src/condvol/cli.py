"""Command-line front end: ``condvol <command> [options]``.

Commands
--------
xvol          conditioned X-state volumes, Monte Carlo next to the closed form
vol           conditioned two-qubit-by-qudit volumes by cube rejection
hist          Bloch-radius histogram, envelope and fitted exponent
psep          separability (PPT) probability on conditioned slices
psep-product  PPT fraction under the simplex x Haar measure, binned in r
constants     closed-form constants as JSON

Data go to ``--out`` (CSV, or stdout when omitted); a run manifest is
written to ``<out>.manifest.json``.  Logs go to stderr.  Exit status is 0 on
success, 2 for usage errors and 3 for runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from condvol import __version__
from condvol import estimators as est
from condvol import xstate
from condvol.statespace import GENERATOR_ORDER, POSITIVITY_TOL, MetricConvention, log_zs_total_volume
from condvol.streams import DEFAULT_CHUNK, RNG_ALGORITHM, SeededStream, chunk_sizes, default_threads

log = logging.getLogger("condvol")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

HEADERS = {
    "xvol": ["r", "v_mc", "v_mc_err", "v_analytic", "n_samples", "n_accepted"],
    "vol": ["r", "v_mc", "v_mc_err", "v_conjectured", "n_samples", "n_accepted"],
    "hist": ["r_lo", "r_hi", "r_center", "count", "envelope"],
    "psep": ["r", "p", "p_err", "n_samples", "n_hits", "label", "exact", "low_count"],
    "psep-product": ["r_center", "p", "p_err", "n_samples", "n_hits", "reliable"],
}

DEFAULT_GRIDS = {
    "xvol": "0:1:0.1",
    "vol": "0:1:0.1",
    "psep": "0:0.99:0.0495",
}

CHUNKS = {"xvol": DEFAULT_CHUNK, "vol": DEFAULT_CHUNK, "hist": 1 << 15, "psep": 1 << 15, "psep-product": 1 << 15}


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop inclusive) or a single value."""
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad grid {text!r}") from None
    if len(vals) == 1:
        grid = vals
    elif len(vals) == 3:
        start, stop, step = vals
        if step <= 0:
            raise UsageError("grid step must be positive")
        n = math.floor((stop - start) / step + 1e-9) + 1
        grid = [round(start + i * step, 12) for i in range(max(n, 0))]
    else:
        raise UsageError(f"grid must be start:stop:step, got {text!r}")
    if not grid:
        raise UsageError(f"grid {text!r} is empty")
    if any(not 0.0 <= r <= 1.0 for r in grid):
        raise UsageError("Bloch radii must lie in [0, 1]")
    return grid


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def write_csv(rows, header, out: Path | None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    if out is None:
        sys.stdout.write(buf.getvalue())
    else:
        out.write_text(buf.getvalue(), encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, MetricConvention):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def build_manifest(command, args, chunk_size, n_per_point, n_points, results, wall):
    params = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    return _jsonable({
        "command": command,
        "params": params,
        "seed": args.seed,
        "chunk_layout": {
            "chunk_size": chunk_size,
            "chunks_per_point": chunk_sizes(n_per_point, chunk_size) if n_per_point else [],
            "points": n_points,
            "stream_ids": list(range(n_points)),
        },
        "rng_algorithm": RNG_ALGORITHM,
        "generator_order": GENERATOR_ORDER,
        "wall_time_s": wall,
        "version": __version__,
        "numpy_version": np.__version__,
        "results": results,
    })


def write_manifest(manifest, out: Path | None) -> None:
    text = json.dumps(manifest, indent=2, sort_keys=True)
    if out is None:
        sys.stderr.write(text + "\n")
    else:
        Path(str(out) + ".manifest.json").write_text(text + "\n", encoding="utf-8")


# commands -------------------------------------------------------------------

def _grid(args):
    if args.r is not None:
        return parse_grid(str(args.r))
    return parse_grid(args.r_grid or DEFAULT_GRIDS[args.command])


def cmd_xvol(args):
    grid = _grid(args)
    rows = []
    for i, r in enumerate(grid):
        e = est.estimate_x_volume(r, args.samples, args.convention, SeededStream(args.seed, i),
                                  CHUNKS["xvol"], args.threads)
        exact = xstate.x_cond_volume_hs(r, args.convention)
        rows.append((r, e.value, e.std_error, exact, e.n_samples, e.n_accepted))
        log.info("xvol r=%.4f v=%.6g +- %.2g (exact %.6g)", r, e.value, e.std_error, exact)
    return rows, len(grid), args.samples, {}


def cmd_vol(args):
    _check_m(args.m)
    grid = _grid(args)
    rows = []
    for i, r in enumerate(grid):
        e = est.estimate_conditioned_volume(r, args.m, args.samples, args.convention, SeededStream(args.seed, i),
                                            args.tol, CHUNKS["vol"], args.threads)
        conj = est.conjectured_volume(r, args.m, args.convention)
        rows.append((r, e.value, e.std_error, conj, e.n_samples, e.n_accepted))
        log.info("vol m=%d r=%.4f v=%.6g +- %.2g (conjectured %.6g)", args.m, r, e.value, e.std_error, conj)
    return rows, len(grid), args.samples, {"conjectured_v0": est.conjectured_volume(0.0, args.m, args.convention)}


def cmd_hist(args):
    _check_m(args.m)
    if args.bins < 10:
        raise UsageError("--bins must be at least 10")
    h = est.radius_histogram(args.m, args.samples, args.bins, SeededStream(args.seed, 0), CHUNKS["hist"],
                             args.threads)
    slope, err = est.fit_envelope_exponent(h)
    chi2, dof, pval = est.envelope_chi2(h)
    log.info("hist m=%d fitted exponent %.3f +- %.3f (envelope %d)", args.m, slope, err, h.exponent)
    rows = [(lo, hi, c, n, e) for lo, hi, c, n, e in
            zip(h.bin_edges[:-1], h.bin_edges[1:], h.centers, h.counts, h.envelope)]
    res = {"envelope_exponent": h.exponent, "fitted_exponent": slope, "fitted_exponent_err": err,
           "envelope_chi2": chi2, "envelope_dof": dof, "envelope_p_value": pval}
    return rows, 1, args.samples, res


def cmd_psep(args):
    _check_m(args.m)
    grid = _grid(args)
    rows, ests = [], []
    for i, r in enumerate(grid):
        e = est.estimate_psep(r, args.m, args.samples, SeededStream(args.seed, i), args.tol, CHUNKS["psep"],
                              args.threads)
        ests.append((r, e))
        rows.append((r, e.value, e.std_error, e.n_samples, e.n_hits, e.label, e.exact, e.low_count))
        log.info("psep m=%d r=%.4f p=%.5f +- %.5f", args.m, r, e.value, e.std_error)
    res = {"label": est.label_for(args.m)}
    sampled = [e for _, e in ests if not e.exact]
    if len(sampled) >= 2:
        chi2, dof, pval = est.flatness_test(sampled)
        res.update(flatness_chi2=chi2, flatness_dof=dof, flatness_p_value=pval)
    if ests and ests[0][0] == 0.0 and sampled:
        val, err = est.integrate_psep(ests)
        res.update(integrated=val, integrated_err=err)
        log.info("integrated %.5f +- %.5f", val, err)
    return rows, len(grid), args.samples, res


def cmd_psep_product(args):
    if args.bins < 2:
        raise UsageError("--bins must be at least 2")
    binned = est.estimate_psep_product_measure(args.samples, args.bins, SeededStream(args.seed, 0),
                                               tol=args.tol, chunk_size=CHUNKS["psep-product"],
                                               threads=args.threads)
    rows = [(rc, e.value, e.std_error, e.n_samples, e.n_hits, e.reliable) for rc, e in binned]
    hits, total = est.total_hits(binned)
    res = {"global_ppt_fraction": hits / total if total else float("nan"),
           "unreliable_bins": [rc for rc, e in binned if not e.reliable]}
    reliable = [e for _, e in binned if e.reliable and e.n_samples > 0]
    if len(reliable) >= 2:
        chi2, dof, pval = est.flatness_test(reliable)
        res.update(flatness_chi2=chi2, flatness_dof=dof, flatness_p_value=pval)
    return rows, 1, args.samples, res


def constants(m: int, convention) -> dict:
    convention = MetricConvention.parse(convention)
    log_zs = log_zs_total_volume(2, m)
    log_v0 = est.log_conjectured_v0(m)
    out = {
        "m": m,
        "convention": convention.value,
        "log_zs_total_volume": log_zs,
        "zs_total_volume": math.exp(log_zs) if log_zs > -745 else None,
        "log_conjectured_v0": log_v0,
        "conjectured_v0": est.conjectured_volume(0.0, m, convention) if log_v0 > -700 else None,
        "envelope_exponent": est.envelope_exponent(m),
        "x_state": {
            c.value: {
                "cond_volume_r0": xstate.x_cond_volume_hs(0.0, c),
                "total_volume": xstate.x_total_volume_hs(c),
            }
            for c in MetricConvention
        },
        "x_state_sep_fraction": xstate.x_psep(0.0),
    }
    if m == 2:
        out["psep_conjectured"] = 8.0 / 33.0
    return out


def cmd_constants(args):
    if args.m < 2:
        raise UsageError("--m must be >= 2")
    sys.stdout.write(json.dumps(_jsonable(constants(args.m, args.convention)), indent=2, sort_keys=True) + "\n")
    return None


def _check_m(m):
    if m < 2:
        raise UsageError("--m must be >= 2")


# parser ---------------------------------------------------------------------

def _convention(text):
    try:
        return MetricConvention.parse(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"unknown convention {text!r}") from None


def _positive_int(text):
    try:
        v = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1 or v != float(text):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condvol", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, *, grid=False, m=None, bins=None, samples=10**6, convention=None):
        p = sub.add_parser(name)
        p.set_defaults(func=func)
        if grid:
            g = p.add_mutually_exclusive_group()
            g.add_argument("--r", type=float, default=None, help="single Bloch radius")
            g.add_argument("--r-grid", default=None, help=f"start:stop:step, inclusive (default {DEFAULT_GRIDS[name]})")
        if m is not None:
            p.add_argument("--m", type=int, default=m, help="environment dimension")
        if bins is not None:
            p.add_argument("--bins", type=int, default=bins)
        if samples:
            p.add_argument("--samples", type=_positive_int, default=samples, help="samples per point (1e6 style ok)")
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--threads", type=int, default=None,
                           help="worker threads (default: $CONDVOL_THREADS or cpu count)")
            p.add_argument("--tol", type=float, default=POSITIVITY_TOL)
            p.add_argument("--out", type=Path, default=None, help="CSV path; stdout if omitted")
        if convention is not None:
            p.add_argument("--convention", type=_convention, default=convention,
                           help="paper-uniform or trace-exact")
        return p

    add("xvol", cmd_xvol, grid=True, convention=MetricConvention.PAPER_UNIFORM)
    add("vol", cmd_vol, grid=True, m=2, samples=10**7, convention=MetricConvention.TRACE_EXACT)
    add("hist", cmd_hist, m=3, bins=100)
    add("psep", cmd_psep, grid=True, m=2, samples=10**5)
    add("psep-product", cmd_psep_product, bins=20)
    add("constants", cmd_constants, m=2, samples=0, convention=MetricConvention.TRACE_EXACT)
    return parser


def _check_output(out: Path | None):
    if out is None:
        return
    parent = out.parent if str(out.parent) else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK) or out.is_dir():
        raise UsageError(f"cannot write to {out}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(levelname)s %(message)s")
    try:
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if hasattr(args, "threads") and args.threads is None:
            args.threads = default_threads()
        _check_output(getattr(args, "out", None))
        t0 = time.perf_counter()
        out = args.func(args)
        if out is None:
            return EXIT_OK
        rows, n_points, n_per_point, results = out
        wall = time.perf_counter() - t0
        write_csv(rows, HEADERS[args.command], args.out)
        manifest = build_manifest(args.command, args, CHUNKS[args.command], n_per_point, n_points, results, wall)
        write_manifest(manifest, args.out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"condvol: error: {exc}\n")
        return EXIT_USAGE
    except (ArithmeticError, ValueError, OSError, np.linalg.LinAlgError) as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
