"""Command-line front end: ``primecantor <command> [flags]``.

Settings come from three layers, later ones winning: built-in defaults,
the ``--config`` file (``key = value`` lines), then explicit flags.
Every command that writes a CSV also writes ``<name>.manifest.json``
next to it, and the CSV's first line names that manifest.

Exit codes: 0 success, 2 usage, 3 numeric failure, 4 resource cap.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import conformal, cramer_model, dimension, primes, series_lab
from .errors import DomainError, OutOfRangeError, PrefixTooShort, RegularityError, TruncationError
from .gauss_ifs import parse_word, point_of_prefix
from .records import CSV_SCHEMA_VERSION, SCHEMAS, RunManifest, dumps, load_config, write_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4

DEFAULTS = {
    "delta": {"alphabet": "primes", "trunc": 100_000, "tol": 1e-4, "nodes": 40, "checks": 0},
    "gaps": {"limit": 1_000_000, "min_gap": 0},
    "rk": {"limit": 10**8, "k": 1, "p_min": 1000},
    "hoheisel": {"limit": 10**7, "theta": 21 / 40, "samples": 1000, "seed": 0, "a_min": 1000},
    "cramer": {"limit": 10**7, "k": 1, "seeds": 20, "seed0": 0, "p_min": 1000},
    "series": {
        "family": "log_power",
        "param": 1.2,
        "lam": 2.0,
        "terms": 100_000,
        "alpha": 1.0,
        "delta": None,
        "trunc": 100_000,
        "k": 1,
        "C": 1.0,
    },
    "measure": {
        "alphabet": "primes",
        "trunc": 100_000,
        "delta": None,
        "r_min": 1e-4,
        "r_max": 1e-1,
        "points": 13,
        "lam": 4.0,
        "prefix": "2,3,5,7,11,13,17,19,23,29",
    },
}
MEM_CAP_MB = 8192


class ResourceCap(RuntimeError):
    pass


def _int(text: str) -> int:
    v = float(text)
    if not v.is_integer():
        raise argparse.ArgumentTypeError(f"expected an integer, got {text}")
    return int(v)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file; explicit flags override it")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--out", default=".", help="directory for CSV and manifest files")
    common.add_argument("--name", default=None, help="artifact base name (default: the command)")
    common.add_argument("--mem-cap-mb", type=int, default=MEM_CAP_MB)

    p = argparse.ArgumentParser(prog="primecantor", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("delta", parents=[common], help="dimension of a truncated alphabet (JSON)")
    d.add_argument("--alphabet")
    d.add_argument("--trunc", type=_int)
    d.add_argument("--tol", type=float)
    d.add_argument("--nodes", type=int)
    d.add_argument("--checks", action="store_const", const=1, default=None, help="add assumption diagnostics")

    g = sub.add_parser("gaps", parents=[common], help="consecutive prime gaps (CSV)")
    g.add_argument("--limit", type=_int)
    g.add_argument("--min-gap", type=_int)

    r = sub.add_parser("rk", parents=[common], help="gap records min(d_{n+1..n+k})/ln^2 p_n (CSV)")
    r.add_argument("--limit", type=_int)
    r.add_argument("--k", type=_int)
    r.add_argument("--p-min", type=_int)

    h = sub.add_parser("hoheisel", parents=[common], help="normalized prime counts in short windows (CSV)")
    h.add_argument("--limit", type=_int)
    h.add_argument("--theta", type=float)
    h.add_argument("--samples", type=_int)
    h.add_argument("--seed", type=_int)
    h.add_argument("--a-min", type=_int)

    c = sub.add_parser("cramer", parents=[common], help="records on random prime sets, one row per seed (CSV)")
    c.add_argument("--limit", type=_int)
    c.add_argument("--k", type=_int)
    c.add_argument("--seeds", type=_int, help="number of seeds, starting at --seed0")
    c.add_argument("--seed0", type=_int)
    c.add_argument("--p-min", type=_int)

    s = sub.add_parser("series", parents=[common], help="series terms (CSV) and a verdict (JSON)")
    s.add_argument("kind", choices=["hd", "sigma2", "sigma1", "borel"])
    s.add_argument("--family", choices=series_lab.FAMILIES)
    s.add_argument("--s", "--param", dest="param", type=float, help="family exponent")
    s.add_argument("--lambda", dest="lam", type=float)
    s.add_argument("--terms", type=_int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--delta", type=float, help="default: computed for primes up to --trunc")
    s.add_argument("--trunc", type=_int)
    s.add_argument("--k", type=_int)
    s.add_argument("--C", type=float)

    m = sub.add_parser("measure", parents=[common], help="conformal-measure scans over r (CSV)")
    m.add_argument("kind", choices=["tail", "annulus", "ball"])
    m.add_argument("--alphabet")
    m.add_argument("--trunc", type=_int)
    m.add_argument("--delta", type=float)
    m.add_argument("--r-min", type=float)
    m.add_argument("--r-max", type=float)
    m.add_argument("--points", type=_int)
    m.add_argument("--lambda", dest="lam", type=float)
    m.add_argument("--prefix", help="word coding the ball centre, e.g. 2,3,5")
    return p


def resolve(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < flags."""
    cfg = dict(DEFAULTS[args.command])
    if args.config:
        file_cfg = load_config(args.config)
        for k, v in file_cfg.items():
            if k not in cfg and k != "threads":
                continue
            if isinstance(cfg.get(k), int) and isinstance(v, float) and v.is_integer():
                v = int(v)  # allow 1e8 style integers
            cfg[k] = v
    for key in list(cfg):
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    threads = args.threads if args.threads is not None else cfg.pop("threads", None)
    cfg["threads"] = int(threads) if threads else (os.cpu_count() or 1)
    return cfg


def _check_sieve_memory(limit: int, cap_mb: int) -> None:
    est = limit / max(math.log(limit), 1) * 8 * 1.3 / 2**20 + 16
    if est > cap_mb:
        raise ResourceCap(f"sieving to {limit} needs about {est:.0f} MB, cap is {cap_mb} MB")


def _paths(args) -> tuple[Path, Path, str]:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = f"{args.command}_{args.kind}" if args.command in ("series", "measure") else args.command
    name = args.name or base
    return out / f"{name}.csv", out / f"{name}.manifest.json", f"{name}.manifest.json"


def _finish(manifest: RunManifest, started: float, path: Path) -> None:
    manifest.finish(started)
    manifest.write(path)


def _default_delta(trunc: int) -> float:
    return dimension.conformal_dimension(dimension.TruncatedAlphabet.primes(trunc), tol=1e-6).delta


def cmd_delta(args, cfg) -> int:
    alph = dimension.TruncatedAlphabet.parse(cfg["alphabet"], cfg["trunc"])
    res = dimension.conformal_dimension(alph, tol=cfg["tol"], nodes=cfg["nodes"])
    report = {
        "delta": res.delta,
        "bracket": list(res.bracket),
        "N": alph.cutoff,
        "alphabet": cfg["alphabet"],
        "tol": cfg["tol"],
        "tail_bound": res.tail_bound,
        "certified": res.certified,
        "evaluations": res.evaluations,
    }
    if cfg["checks"]:
        table = primes.sieve(max(2 * alph.cutoff, 100), threads=cfg["threads"])
        report["assumption_checks"] = dimension.assumption_checks(alph, table, res.delta)
    print(dumps(report))
    return EXIT_OK if res.certified else EXIT_NUMERIC


def cmd_gaps(args, cfg, manifest):
    _check_sieve_memory(cfg["limit"], args.mem_cap_mb)
    table = primes.sieve(cfg["limit"], threads=cfg["threads"])
    n, p, d = primes.gaps(table)
    keep = d >= cfg["min_gap"]
    manifest.truncation = {"limit": cfg["limit"]}
    return zip(n[keep], p[keep], d[keep]), "gaps"


def cmd_rk(args, cfg, manifest):
    _check_sieve_memory(cfg["limit"], args.mem_cap_mb)
    table = primes.sieve(cfg["limit"], threads=cfg["threads"])
    recs = primes.rk_records(table, cfg["k"], p_min=cfg["p_min"])
    manifest.truncation = {"limit": cfg["limit"], "p_min": cfg["p_min"]}
    if recs:
        last = recs[-1]
        print(f"final record {last.normalized:.6f} at p_n={last.p_n} (window min {last.window_min})")
    return ((r.n, r.p_n, r.d_n, r.window_min, r.normalized) for r in recs), "rk"


def cmd_hoheisel(args, cfg, manifest):
    _check_sieve_memory(cfg["limit"], args.mem_cap_mb)
    table = primes.sieve(cfg["limit"], threads=cfg["threads"])
    st = primes.hoheisel_ratios(table, cfg["theta"], cfg["samples"], seed=cfg["seed"], a_min=cfg["a_min"])
    manifest.seeds = [cfg["seed"]]
    manifest.truncation = {"limit": cfg["limit"]}
    print(f"ratios: min {st.min:.6f} median {st.median:.6f} max {st.max:.6f}")
    return ((a, b, r) for (a, b), r in zip(st.windows, st.ratios)), "hoheisel"


def cmd_cramer(args, cfg, manifest):
    seeds = list(range(cfg["seed0"], cfg["seed0"] + cfg["seeds"]))
    rows = []
    for seed in seeds:
        rset = cramer_model.simulate(cfg["limit"], seed, threads=cfg["threads"])
        recs = cramer_model.rk_on_model(rset, cfg["k"], p_min=cfg["p_min"])
        if recs:
            r = recs[-1]
            rows.append((seed, r.n, r.p_n, r.d_n, r.window_min, r.normalized))
    manifest.seeds = seeds
    manifest.truncation = {"limit": cfg["limit"], "p_min": cfg["p_min"]}
    if rows:
        print(f"median final record {float(np.median([r[-1] for r in rows])):.6f} over {len(rows)} seeds")
    return rows, "cramer"


def cmd_series(args, cfg, manifest):
    kind = args.kind
    if kind == "borel":
        terms = cfg["terms"]
        limit = max(int(terms * (math.log(terms) + math.log(math.log(terms + 3)) + 2)), 100)
        _check_sieve_memory(limit, args.mem_cap_mb)
        table = primes.sieve(limit, threads=cfg["threads"])
        p = table.primes[:terms].astype(float)
        t = np.exp(-cfg["k"] * cfg["C"] * np.log(p))
        stream = series_lab.TermStream("borel_cantelli", np.arange(1, terms + 1), t, np.zeros(terms, bool), {"k": cfg["k"], "C": cfg["C"]})
    else:
        delta = cfg["delta"] if cfg["delta"] is not None else _default_delta(cfg["trunc"])
        spec = series_lab.DimensionFunctionSpec(cfg["family"], cfg["param"], delta)
        manifest.truncation = {"trunc": cfg["trunc"], "delta": delta}
        if kind == "hd":
            stream = series_lab.hd_series_terms(spec, cfg["lam"], delta, cfg["terms"])
        else:
            alph = dimension.TruncatedAlphabet.primes(cfg["trunc"])
            if kind == "sigma2":
                stream = series_lab.sigma_doubleprime_terms(spec, cfg["alpha"], delta, alph)
            else:
                table = primes.sieve(int(cfg["trunc"] * 4 / 3) + 2, threads=cfg["threads"])
                stream = series_lab.sigma_prime_one(spec, cfg["alpha"], delta, table, alph)
    diag = series_lab.verdict(stream)
    print(dumps(diag.record()))
    partial = stream.partial_sums
    return zip(stream.index, stream.terms, partial, stream.flagged), "series"


def cmd_measure(args, cfg, manifest):
    alph = dimension.TruncatedAlphabet.parse(cfg["alphabet"], cfg["trunc"])
    model = conformal.MeasureModel.build(alph, cfg["delta"])
    radii = np.geomspace(cfg["r_max"], cfg["r_min"], cfg["points"])
    manifest.truncation = {"trunc": cfg["trunc"], "delta": model.delta}
    rows = []
    dist = model.distortion
    for r in radii:
        r = float(r)
        if args.kind == "tail":
            t = conformal.tail_measure(model, r)
            raw = t.mass * model.normalization
            rows.append((r, t.mass, raw / dist, raw))
        elif args.kind == "annulus":
            a = conformal.annulus_ratio(model, r, cfg["lam"])
            rows.append((r, a.ratio, a.ratio / dist, a.ratio * dist))
        else:
            x = point_of_prefix(parse_word(cfg["prefix"]), int(alph.letters[0]))
            b = conformal.ball_measure(model, x, Fraction(r)).measure
            rows.append((r, b.value, b.lower, b.upper))
    return rows, "measure"


HANDLERS = {
    "gaps": cmd_gaps,
    "rk": cmd_rk,
    "hoheisel": cmd_hoheisel,
    "cramer": cmd_cramer,
    "series": cmd_series,
    "measure": cmd_measure,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        if args.command == "delta":
            return cmd_delta(args, cfg)
        started = time.perf_counter()
        csv_path, man_path, man_name = _paths(args)
        manifest = RunManifest(
            argv=list(argv if argv is not None else sys.argv[1:]),
            command=args.command if args.command not in ("series", "measure") else f"{args.command} {args.kind}",
            config={k: v for k, v in cfg.items() if k != "threads"},
        )
        rows, kind = HANDLERS[args.command](args, cfg, manifest)
        write_csv(csv_path, kind, rows, man_name)
        manifest.outputs = [csv_path.name]
        manifest.csv_schema = {"kind": kind, "version": CSV_SCHEMA_VERSION, "columns": list(SCHEMAS[kind])}
        _finish(manifest, started, man_path)
        print(f"wrote {csv_path}")
        return EXIT_OK
    except ResourceCap as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (RegularityError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, OutOfRangeError, TruncationError, PrefixTooShort, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except MemoryError as exc:
        print(f"error: out of memory ({exc})", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
