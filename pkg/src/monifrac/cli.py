"""Command-line entry point: ``simulate``, ``analytic`` and ``fit``.

Configs are YAML documents mirroring :class:`ensemble.ExperimentSpec`
field-for-field, plus optional ``output`` and ``fit`` sections::

    dynamics: quantum_haar
    scheme: projective          # or {kind: generalized, error_rate: 0.5}
    L_list: [64, 128, 256]
    c: 1.0
    n_traj: 1000
    master_seed: 7
    output: {dir: results, recentered: true, time_series: false}
    fit: {min_L: 128, weighted: false}

Unknown keys are rejected. CSV floats carry 17 significant digits, so a
parse/serialize round trip is exact.
"""
import argparse
import csv
import json
import logging
import math
import os
from pathlib import Path
import sys

import numpy as np
import yaml

from . import __version__, analytic, ensemble, scaling
from .qdyn import MeasurementScheme

log = logging.getLogger("monifrac")

STATS_COLUMNS = ["dynamics", "scheme", "L", "p", "q", "l_box", "mean_ipr", "mean_ipr_stderr",
                 "typical_ipr", "typical_ipr_stderr", "mean_var", "mean_var_stderr", "n_traj"]
EXPONENT_COLUMNS = ["q", "l_box", "tau_q", "tau_q_stderr", "tau_star_q", "tau_star_q_stderr",
                    "D_q", "Delta_q", "D0", "tau_var"]
TIMESERIES_COLUMNS = ["L", "t", "q", "mean_ipr", "mean_ipr_stderr", "typical_ipr",
                      "typical_ipr_stderr", "mean_var", "mean_var_stderr", "n_traj"]
RECENTERED_COLUMNS = ["L", "index", "mean_p"]
DIVERGENT = "divergent time integral"

SPEC_KEYS = {"dynamics", "scheme", "L_list", "c", "p", "q_grid", "l_box_list", "T",
             "n_traj", "boundary", "master_seed", "r"}
OUTPUT_DEFAULTS = {"dir": "results", "recentered": True, "time_series": False, "n_times": 32}
FIT_DEFAULTS = {"min_L": 128, "weighted": False, "min_points": 3}


class ConfigError(ValueError):
    pass


# --- configuration --------------------------------------------------------

def _section(doc, name, defaults):
    sec = doc.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    unknown = set(sec) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {sorted(unknown)}")
    return {**defaults, **sec}


def parse_config(doc):
    """``(spec, output, fit)`` from a parsed config mapping."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(doc) - SPEC_KEYS - {"output", "fit"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = {"dynamics", "L_list", "n_traj"} - set(doc)
    if missing:
        raise ConfigError(f"missing config keys: {sorted(missing)}")
    fields = {k: v for k, v in doc.items() if k in SPEC_KEYS}
    scheme = fields.get("scheme")
    try:
        if isinstance(scheme, str):
            fields["scheme"] = MeasurementScheme.from_label(scheme)
        elif isinstance(scheme, dict):
            bad = set(scheme) - {"kind", "error_rate"}
            if bad:
                raise ConfigError(f"unknown keys in 'scheme': {sorted(bad)}")
            fields["scheme"] = MeasurementScheme(**scheme)
        elif scheme is not None:
            raise ConfigError("'scheme' must be a label or a mapping")
        spec = ensemble.ExperimentSpec(**fields)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return spec, _section(doc, "output", OUTPUT_DEFAULTS), _section(doc, "fit", FIT_DEFAULTS)


def spec_to_config(spec, output=None, fit=None):
    """Config mapping that :func:`parse_config` turns back into ``spec``."""
    doc = spec.to_dict()
    doc["scheme"] = {"kind": spec.scheme.kind, "error_rate": spec.scheme.error_rate}
    if output is not None:
        doc["output"] = dict(output)
    if fit is not None:
        doc["fit"] = dict(fit)
    return doc


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(doc)


# --- CSV ------------------------------------------------------------------

def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path, columns, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) for c in columns])


def exponent_rows(table):
    return [{c: getattr(r, c) for c in EXPONENT_COLUMNS} for r in table.rows]


def read_stats_csv(path):
    """Rows of a ``stats.csv`` file with numeric columns converted.

    Raises ValueError naming the offending line on schema violations.
    """
    need = ["L", "q", "l_box", "mean_ipr", "typical_ipr", "mean_var"]
    ints = {"L", "l_box", "n_traj"}
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in need if c not in header]
        if missing:
            raise ValueError(f"{path}: line 1: missing columns {missing}")
        for lineno, raw in enumerate(reader, start=2):
            row = {}
            for key, val in raw.items():
                if key is None or val is None:
                    raise ValueError(f"{path}: line {lineno}: wrong number of fields")
                if key in ("dynamics", "scheme"):
                    row[key] = val
                    continue
                try:
                    row[key] = int(val) if key in ints else float(val)
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}: bad value {val!r} in column {key!r}") from None
            rows.append(row)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


# --- subcommands ----------------------------------------------------------

def cmd_simulate(args):
    spec, output, fit = load_config(args.config)
    if args.time_series:
        output["time_series"] = True
    out = Path(args.out or output["dir"])
    out.mkdir(parents=True, exist_ok=True)
    result = ensemble.run(spec, workers=args.workers, backend=args.backend,
                          recentered=output["recentered"], time_series=output["time_series"],
                          n_times=output["n_times"])

    cells = result.cells()
    write_csv(out / "stats.csv", STATS_COLUMNS, cells)
    # exponents are fitted on values as stored, so `fit` on stats.csv reproduces them
    stored = read_stats_csv(out / "stats.csv")
    try:
        table = scaling.exponent_table(stored, fit["min_L"], weighted=fit["weighted"],
                                       min_points=fit["min_points"])
        erows = exponent_rows(table)
    except ValueError as exc:
        log.warning("no exponents fitted: %s", exc)
        erows = []
    write_csv(out / "exponents.csv", EXPONENT_COLUMNS, erows)

    if result.recentered is not None:
        rows = [{"L": L, "index": int(i), "mean_p": float(v)}
                for L, dist in result.recentered.items()
                for i, v in zip(range(-L // 2 + 1, L // 2 + 1), dist)]
        write_csv(out / "recentered_dist.csv", RECENTERED_COLUMNS, rows)
    if result.time_series:
        rows = []
        for L, series in result.time_series.items():
            for t, st in series:
                for i, q in enumerate(st.q_grid):
                    rows.append({"L": L, "t": t, "q": q,
                                 "mean_ipr": st.mean_ipr[i, 0], "mean_ipr_stderr": st.mean_ipr_stderr[i, 0],
                                 "typical_ipr": st.typical_ipr[i, 0],
                                 "typical_ipr_stderr": st.typical_ipr_stderr[i, 0],
                                 "mean_var": st.mean_var, "mean_var_stderr": st.mean_var_stderr,
                                 "n_traj": st.count})
        write_csv(out / "timeseries.csv", TIMESERIES_COLUMNS, rows)

    meta = {"spec": spec_to_config(spec), "output": output, "fit": fit,
            "master_seed": spec.master_seed, "version": __version__,
            "wall_time_s": result.metadata["wall_time_s"], "workers": result.metadata["workers"]}
    with open(out / "run.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(cells)} stats rows and {len(erows)} exponent rows to {out}")
    return 0


def _q_values(args):
    if args.q_step <= 0 or args.q_min <= 0 or args.q_max < args.q_min:
        raise ValueError("need 0 < q-min <= q-max and q-step > 0")
    n = int(math.floor((args.q_max - args.q_min) / args.q_step + 1e-9)) + 1
    return [round(args.q_min + k * args.q_step, 12) for k in range(n)]


def cmd_analytic(args):
    qs = _q_values(args)
    L = args.L
    rows = []
    if args.model == "single_shot":
        columns = ["q", "mean_ipr", "typical_ipr", "tau_q", "tau_star_q"]
        if args.e is not None:
            columns.append("generalized_ipr")
        for q in qs:
            row = {"q": q, "mean_ipr": analytic.single_shot_mean_ipr(L, q, args.r),
                   "typical_ipr": math.exp(analytic.single_shot_typical_ln_ipr(L, q, args.r))}
            row["tau_q"], row["tau_star_q"] = analytic.single_shot_exponents(q)
            if args.e is not None:
                row["generalized_ipr"] = analytic.generalized_single_shot_ipr(L, q, args.e)
            rows.append(row)
    else:
        if L <= 0:
            raise ValueError("L must be positive")
        columns = ["q", "mean_ipr", "typical_ipr", "tau_q", "tau_star_q"]
        for q in qs:
            forms = analytic.resetting_closed_forms(L, q)
            try:
                mean = forms.mean_ipr
            except analytic.DivergentIntegralError:
                mean = DIVERGENT
            rows.append({"q": q, "mean_ipr": mean, "typical_ipr": forms.typical_ipr,
                         "tau_q": forms.tau_q, "tau_star_q": forms.tau_star_q})
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    if args.csv:
        write_csv(args.csv, columns, rows)
    return 0


def cmd_fit(args):
    rows = read_stats_csv(args.stats)
    table = scaling.exponent_table(rows, args.min_L, weighted=args.weighted, min_points=args.min_points)
    out = args.out or os.path.join(os.path.dirname(os.path.abspath(args.stats)), "exponents.csv")
    write_csv(out, EXPONENT_COLUMNS, exponent_rows(table))
    print(f"wrote {len(table.rows)} exponent rows to {out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="monifrac", description="Monitored single-particle circuits: "
                                 "trajectory ensembles, closed forms and scaling fits.")
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run an ensemble described by a YAML config")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (overrides output.dir)")
    s.add_argument("--workers", type=int, help="worker processes (default: $MONIFRAC_WORKERS or 1)")
    s.add_argument("--backend", choices=["compiled", "python"])
    s.add_argument("--time-series", action="store_true", help="also write timeseries.csv")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("analytic", help="tabulate closed-form IPRs over a q grid")
    a.add_argument("model", choices=["single_shot", "resetting"])
    a.add_argument("--L", type=int, required=True)
    a.add_argument("--q-min", type=float, default=0.5)
    a.add_argument("--q-max", type=float, default=4.0)
    a.add_argument("--q-step", type=float, default=0.5)
    a.add_argument("--r", type=int, default=1, help="measured sites (single_shot)")
    a.add_argument("--e", type=float, help="generalized error rate (single_shot)")
    a.add_argument("--csv", help="also write the table to this file")
    a.set_defaults(func=cmd_analytic)

    f = sub.add_parser("fit", help="recompute exponents.csv from a stats.csv")
    f.add_argument("stats")
    f.add_argument("--min-L", dest="min_L", type=float, default=128)
    f.add_argument("--min-points", type=int, default=3)
    f.add_argument("--weighted", action="store_true")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, ensemble.TrajectoryError) as exc:
        print(f"monifrac {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
