"""Command-line front end: experiment orchestration with reproducible runs.

Every invocation writes a timestamped run directory containing config.json,
the result tables as CSV, and a manifest with content digests.  Re-running a
persisted config reproduces byte-identical CSV bodies for any worker count.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import re
import sys
import time
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .engines import (
    Family,
    expand,
    expansion_to_json,
    naive_complex_trap,
    naive_region_contains,
    reduce_to_domain,
)
from .errors import (
    CfExtremesError,
    InsufficientMass,
    MissingConstants,
    OutsideDomain,
    PrecisionExhausted,
    RegionViolation,
)
from .evt import (
    rate_curve,
    run_evl_experiment,
    run_poisson_experiment,
)
from .measures import (
    CuspConstants,
    LOG_2,
    LOG_G,
    density_histogram,
    empirical_tail_curve,
    estimate_cusp_constants,
    exact_tail_curve,
    region_classify_arrays,
    stationary_sample_hccf,
    symmetry_defect,
)
from .numerics import (
    ComplexPartsSource,
    ConstantSource,
    RandomStream,
    RationalSource,
)

SCHEMA_VERSION = 1
SEED_ENV_VAR = "CFEXTREMES_SEED"

EXIT_VALIDATION = 2
EXIT_COMPUTE = 3


def _fmt(x) -> str:
    """Decimal text with 17 significant digits (CSV/JSON numeric format)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _utc_stamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunDirectory:
    """Owns one run's output files and writes the closing manifest."""

    def __init__(self, root: Path, command: str):
        self.command = command
        self.path = root / f"{command}-{_utc_stamp()}"
        self.path.mkdir(parents=True, exist_ok=False)
        self._t0 = time.perf_counter()
        self._extra: dict = {}

    def write_csv(self, name: str, header: list[str], rows: list[list]) -> Path:
        p = self.path / name
        with p.open("w", encoding="utf-8", newline="\n") as f:
            f.write(",".join(header) + "\n")
            for row in rows:
                f.write(",".join(_fmt(c) if not isinstance(c, str) else c for c in row) + "\n")
        return p

    def write_json(self, name: str, payload: dict) -> Path:
        p = self.path / name
        payload = {"schema_version": SCHEMA_VERSION, **payload}
        with p.open("w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
        return p

    def note(self, **kv) -> None:
        self._extra.update(kv)

    def finish(self, config: dict) -> Path:
        files = [
            {"name": p.name, "sha256": _sha256(p), "bytes": p.stat().st_size}
            for p in sorted(self.path.iterdir())
            if p.name != "manifest.json"
        ]
        manifest = {
            "schema_version": SCHEMA_VERSION,
            "tool": f"cfextremes {__version__}",
            "command": self.command,
            "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "wall_clock_seconds": time.perf_counter() - self._t0,
            "config": config,
            "files": files,
            **self._extra,
        }
        p = self.path / "manifest.json"
        with p.open("w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
            f.write("\n")
        return p


# ---------------------------------------------------------------------------
# Input parsing
# ---------------------------------------------------------------------------

_COMPLEX_RE = re.compile(
    r"^(?P<re>[+-]?(?:\d+(?:\.\d*)?|\.\d+))?"
    r"(?P<im>[+-](?:\d+(?:\.\d*)?|\.\d+)?)?i?$"
)


def _parse_real_token(tok: str) -> Fraction:
    if "/" in tok:
        num, den = tok.split("/")
        return Fraction(int(num), int(den))
    return Fraction(tok)


def parse_expand_input(family: Family, text: str):
    """Turn --input text into (a0 description, in-domain source/value)."""
    text = text.strip()
    if text in ("pi", "sqrt2", "golden"):
        base = ConstantSource(text)
        if family is Family.HCCF:
            src = ComplexPartsSource(base, RationalSource(Fraction(0)))
            a0, reduced = reduce_to_domain(family, src)
            return [a0.a, a0.b], reduced
        a0, reduced = reduce_to_domain(family, base)
        return a0, reduced
    if family is Family.HCCF:
        if text.endswith("i"):
            m = _COMPLEX_RE.match(text)
            if not m or m.group("im") is None:
                raise ValueError(f"cannot parse complex literal {text!r}")
            re_part = Fraction(m.group("re")) if m.group("re") else Fraction(0)
            im_text = m.group("im")
            if im_text in ("+", "-"):
                im_text += "1"
            im_part = Fraction(im_text)
        else:
            re_part, im_part = _parse_real_token(text), Fraction(0)
        a0, reduced = reduce_to_domain(family, (re_part, im_part))
        return [a0.a, a0.b], reduced
    value = _parse_real_token(text)
    a0, reduced = reduce_to_domain(family, value)
    return a0, reduced


def load_constants(path_or_none) -> CuspConstants:
    """Cusp constants from a file, or the bundled default estimate."""
    if path_or_none:
        with open(path_or_none, "r", encoding="utf-8") as f:
            return CuspConstants.from_json_dict(json.load(f))
    ref = resources.files("cfextremes").joinpath("data/hccf_constants.json")
    with ref.open("r", encoding="utf-8") as f:
        d = json.load(f)
    cc = CuspConstants.from_json_dict(d)
    cc.provenance.setdefault("source", "bundled default estimate")
    return cc


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _cmd_expand(args, run: RunDirectory) -> None:
    family = Family(args.family)
    a0, src = parse_expand_input(family, args.input)
    exp = expand(family, src, args.digits, p0=args.p0)
    payload = expansion_to_json(exp, args.input, exp.precision_bits or "exact")
    payload["a0"] = a0
    run.write_json("expansion.json", payload)
    if family is Family.RCF:
        rows = [[i + 1, d] for i, d in enumerate(exp.digits)]
        run.write_csv("digits.csv", ["index", "digit"], rows)
    elif family is Family.NICF:
        rows = [[i + 1, b, e] for i, (b, e) in enumerate(zip(exp.b, exp.eps))]
        run.write_csv("digits.csv", ["index", "b", "eps"], rows)
    else:
        rows = [[i + 1, d.a, d.b] for i, d in enumerate(exp.digits)]
        run.write_csv("digits.csv", ["index", "a_re", "a_im"], rows)
    run.note(status=exp.status.value, digits_emitted=len(rows))


def _log_spaced_integers(lo: int, hi: int, points: int) -> list[int]:
    js = np.unique(np.round(np.geomspace(lo, hi, points)).astype(int))
    return [int(j) for j in js if lo <= j <= hi]


def _cmd_tail(args, run: RunDirectory) -> None:
    family = Family(args.family)
    js = _log_spaced_integers(args.j_min, args.j_max, args.points)
    if family is Family.HCCF:
        stream = RandomStream(args.seed)
        sample = stationary_sample_hccf(
            stream, args.samples, burn_in=args.burn_in, workers=args.workers
        )
        curve = empirical_tail_curve(sample, js)
        scale = [j * j * t for j, t in zip(curve.js, curve.tails)]
        scale_name = "j2_tail"  # converges to H
    else:
        curve = exact_tail_curve(family, js)
        const = LOG_2 if family is Family.RCF else LOG_G
        scale = [j * t * const for j, t in zip(curve.js, curve.tails)]
        scale_name = "j_tail_logc"  # converges to 1
    rows = [[j, t, s] for j, t, s in zip(curve.js, curve.tails, scale)]
    run.write_csv("tail.csv", ["j", "tail", scale_name], rows)
    run.note(points=len(rows))


def _cmd_density(args, run: RunDirectory) -> None:
    stream = RandomStream(args.seed)
    sample = stationary_sample_hccf(
        stream, args.samples, burn_in=args.burn_in, workers=args.workers
    )
    grid = density_histogram(sample.x, sample.y, args.resolution)
    defect = symmetry_defect(grid)
    rows = [
        [r, c, int(grid.counts[r, c])]
        for r in range(grid.resolution)
        for c in range(grid.resolution)
    ]
    run.write_csv("histogram.csv", ["row", "col", "count"], rows)
    run.write_json(
        "histogram.json",
        {
            "resolution": grid.resolution,
            "total": grid.total,
            "seed": args.seed,
            "burn_in": args.burn_in,
        },
    )
    tags = region_classify_arrays(sample.x, sample.y)
    region_rows = [[k, int(np.count_nonzero(tags == k))] for k in range(13)]
    run.write_csv("region_counts.csv", ["region", "count"], region_rows)
    run.write_json(
        "summary.json",
        {
            "symmetry_defect": defect,
            "min_cell_count": int(grid.counts.min()),
            "positive_cells": int(np.count_nonzero(grid.counts)),
            "cells": grid.resolution ** 2,
        },
    )
    run.note(symmetry_defect=defect)


def _cmd_constants(args, run: RunDirectory) -> None:
    stream = RandomStream(args.seed)
    sample = stationary_sample_hccf(
        stream, args.samples, burn_in=args.burn_in, workers=args.workers
    )
    cc = estimate_cusp_constants(sample, args.j_grid)
    run.write_json("constants.json", cc.to_json_dict())
    rows = []
    for row, j in enumerate(cc.j_grid):
        for k in range(4):
            rows.append(
                [
                    j,
                    k + 1,
                    cc.bulk_estimates[row, k],
                    cc.bulk_se[row, k],
                    cc.sliver_estimates[row, k],
                    cc.sliver_se[row, k],
                ]
            )
    run.write_csv(
        "sectors.csv",
        ["j", "sector", "bulk_estimate", "bulk_se", "sliver_estimate", "sliver_se"],
        rows,
    )
    run.note(c_tilde=cc.c_tilde, c=cc.c, plateau_ratio=cc.plateau_ratio)


def _cmd_evl(args, run: RunDirectory) -> None:
    family = Family(args.family)
    constants = None
    if family is Family.HCCF:
        constants = load_constants(args.constants)
        run.note(constants_provenance=constants.provenance | {
            "j_grid": list(constants.j_grid),
            "samples": constants.samples,
            "c": constants.c,
            "c_se": constants.c_se,
        })
    rep = run_evl_experiment(
        family,
        args.n,
        args.samples,
        args.r_grid,
        args.k,
        RandomStream(args.seed),
        constants=constants,
        p0=args.p0,
        workers=args.workers,
    )
    rows = [
        [r.r, r.k, r.u_n, r.empirical, r.limit, r.deviation, r.stderr]
        for r in rep.rows
    ]
    run.write_csv(
        "evl.csv", ["r", "k", "u_n", "empirical", "limit", "deviation", "stderr"], rows
    )
    run.write_json(
        "summary.json",
        {
            "family": family.value,
            "n": args.n,
            "samples": args.samples,
            "ks_distance": {str(k): v for k, v in rep.ks_distance.items()},
        },
    )
    run.note(ks_distance=rep.ks_distance[1])


def _cmd_poisson(args, run: RunDirectory) -> None:
    family = Family(args.family)
    constants = None
    if family is Family.HCCF:
        constants = load_constants(args.constants)
        run.note(constants_provenance=constants.provenance)
    rep = run_poisson_experiment(
        family,
        args.n,
        args.samples,
        args.r,
        args.j_max,
        RandomStream(args.seed),
        constants=constants,
        p0=args.p0,
        workers=args.workers,
    )
    rows = [
        [str(j), int(o), e]
        for j, o, e in zip(rep.js, rep.observed, rep.expected)
    ]
    run.write_csv("poisson.csv", ["j", "observed", "expected"], rows)
    frac_s0 = float(np.mean(rep.counts == 0))
    run.write_json(
        "summary.json",
        {
            "family": family.value,
            "n": args.n,
            "samples": args.samples,
            "r": args.r,
            "tau": rep.tau,
            "u_n": rep.u_n,
            "chi2": rep.chi2,
            "dof": rep.dof,
            "pvalue": rep.pvalue,
            "fraction_no_exceedance": frac_s0,
        },
    )
    run.note(pvalue=rep.pvalue)


def _cmd_rate(args, run: RunDirectory) -> None:
    family = Family(args.family)
    constants = None
    if family is Family.HCCF:
        constants = load_constants(args.constants)
        run.note(constants_provenance=constants.provenance)
    probe = rate_curve(
        family,
        args.n_grid,
        args.r,
        args.samples,
        RandomStream(args.seed),
        constants=constants,
        theta=args.theta,
        workers=args.workers,
    )
    rows = [
        [n, l, d, e]
        for n, l, d, e in zip(probe.n_grid, probe.l_values, probe.deviations, probe.envelope)
    ]
    run.write_csv("rate.csv", ["n", "l_n", "deviation", "envelope"], rows)
    run.note(final_deviation=probe.deviations[-1])


def _cmd_demo_naive(args, run: RunDirectory) -> None:
    stream = RandomStream(args.seed)
    rows = []
    violations = 0
    found = 0
    sub_index = 0
    while found < args.points:
        sub = stream.substream(sub_index)
        sub_index += 1
        if sub_index > 100 * args.points + 100:
            raise RuntimeError("rejection sampling failed to fill the region")
        kx = sub.mantissa_bits(0, 512)
        ky = sub.mantissa_bits(1, 512)
        x = Fraction(1, 2) + Fraction(kx, 1 << 513)  # (1/2, 1)
        y = Fraction(ky, 1 << 512)  # (0, 1)
        if not naive_region_contains((x, y)):
            continue
        found += 1
        try:
            report = naive_complex_trap((x, y), args.iters)
            rows.append([found - 1, float(x), float(y), report.iterations, 1, 0])
        except RegionViolation as exc:
            violations += 1
            rows.append([found - 1, float(x), float(y), -1, 0, 1])
            run.note(last_violation=str(exc))
    run.write_csv(
        "report.csv",
        ["index", "x", "y", "iterations", "all_digits_minus_i", "violation"],
        rows,
    )
    run.write_json(
        "summary.json",
        {"points": args.points, "iters": args.iters, "violations": violations},
    )
    run.note(violations=violations)


# ---------------------------------------------------------------------------
# Argument plumbing
# ---------------------------------------------------------------------------


def _csv_floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _csv_ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    p.add_argument("--out-dir", type=str, default="runs")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--config", type=str, default=None,
                   help="JSON file of defaults; explicit flags win")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="cfextremes",
        description="Continued-fraction digit engines and extreme-value experiments",
    )
    ap.add_argument("--version", action="version", version=f"cfextremes {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", help="digits of a constant or literal")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--input", required=True)
    p.add_argument("--digits", type=int, required=True)
    p.add_argument("--p0", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("tail", help="exact or empirical digit tail curves")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--j-min", type=int, default=2)
    p.add_argument("--j-max", type=int, default=1000)
    p.add_argument("--points", type=int, default=40)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--burn-in", type=int, default=50)
    _add_common(p)

    p = sub.add_parser("density", help="Hurwitz invariant density histogram")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--resolution", type=int, default=64)
    _add_common(p)

    p = sub.add_parser("constants", help="estimate the cusp constants")
    p.add_argument("--samples", type=int, default=10_000_000)
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--j-grid", type=_csv_floats, default=[8.0, 12.0, 16.0])
    _add_common(p)

    p = sub.add_parser("evl", help="extreme value law experiment")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--r-grid", type=_csv_floats, default=[0.5, 1.0, 2.0])
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--constants", type=str, default=None,
                   help="cusp constants JSON (hccf; default: bundled estimate)")
    p.add_argument("--p0", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("poisson", help="Poisson law of exceedances experiment")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, required=True)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--j-max", type=int, default=4)
    p.add_argument("--constants", type=str, default=None)
    p.add_argument("--p0", type=int, default=None)
    _add_common(p)

    p = sub.add_parser("rate", help="convergence-rate probe over n")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--n-grid", type=_csv_ints, default=[256, 1024, 8192])
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--theta", type=float, default=0.75)
    p.add_argument("--constants", type=str, default=None)
    _add_common(p)

    p = sub.add_parser("demo-naive", help="naive complex CF trap demonstration")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--iters", type=int, default=100)
    _add_common(p)

    return ap


_COMMANDS = {
    "expand": _cmd_expand,
    "tail": _cmd_tail,
    "density": _cmd_density,
    "constants": _cmd_constants,
    "evl": _cmd_evl,
    "poisson": _cmd_poisson,
    "rate": _cmd_rate,
    "demo-naive": _cmd_demo_naive,
}


def _apply_config_file(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    if not args.config:
        return
    with open(args.config, "r", encoding="utf-8") as f:
        overrides = json.load(f)
    if not isinstance(overrides, dict):
        raise ValueError("--config must contain a JSON object")
    argv_text = " ".join(sys.argv)
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ValueError(f"unknown config key {key!r}")
        # explicit command-line flags beat config-file values
        if f"--{key.replace('_', '-')}" in argv_text:
            continue
        setattr(args, attr, value)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_file(args, parser)
        if args.seed is None:
            args.seed = int(os.environ.get(SEED_ENV_VAR, "0"))
        run = RunDirectory(Path(args.out_dir), args.command)
        _COMMANDS[args.command](args, run)
        config = {
            k: v for k, v in vars(args).items() if k not in ("config",)
        }
        manifest = run.finish(config)
        print(json.dumps({"run_dir": str(run.path), "manifest": str(manifest)}))
        return 0
    except (MissingConstants, InsufficientMass, PrecisionExhausted) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return EXIT_COMPUTE
    except (ValueError, OutsideDomain, CfExtremesError, OSError) as exc:
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return EXIT_VALIDATION


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
