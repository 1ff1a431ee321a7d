"""Command-line entry points.

Exit codes: 0 on success; 2 on configuration errors (bad flags or
malformed configs, plans, datasets); 1 on runtime failures (missing or
corrupt files, undefined metrics).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .campaign import (
    bit_census,
    emit_plot_data,
    histogram_csv_text,
    load_output_plan,
    masked_output_histogram,
    parse_campaign_config,
    read_results_csv,
    run_campaign,
    write_plot_csv,
    write_results_csv,
)
from .errors import ConfigurationError, FlowFiError
from .modelio import (
    SyntheticSpec,
    build_model_grid,
    calibrate_threshold,
    generate_synthetic,
    load_dataset,
    load_model,
    new_model,
    parse_model_id,
    save_model,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowfi",
        description="Deterministic fault-injection campaigns for Real NVP "
        "anomaly detectors.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="execute a campaign config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--audit", action="store_true",
                     help="also write audit.jsonl with every injected bit")

    census = sub.add_parser("census", help="per-bit-position set-bit counts")
    census.add_argument("--model", required=True)
    census.add_argument("--out", required=True)

    hist = sub.add_parser("histogram", help="final-layer output distributions")
    hist.add_argument("--model", required=True)
    hist.add_argument("--plan", required=True, help="output plan JSON file")
    hist.add_argument("--data", required=True)
    hist.add_argument("--bins", type=int, required=True)
    hist.add_argument("--seed", type=int, default=0)
    hist.add_argument("--out", default=None, help="CSV path (default stdout)")

    plot = sub.add_parser("plotdata", help="plot tables from results.csv")
    plot.add_argument("--rows", required=True)
    plot.add_argument("--kind", required=True, choices=["radial", "parallel"])
    plot.add_argument("--out", required=True)

    gend = sub.add_parser("gen-data", help="write synthetic dataset splits")
    gend.add_argument("--out-dir", required=True)
    gend.add_argument("--channels", type=int, default=2)
    gend.add_argument("--window", type=int, default=4)
    gend.add_argument("--nominal", type=int, default=250)
    gend.add_argument("--anomalous", type=int, default=750)
    gend.add_argument("--kind", default="bias-shift",
                      choices=["bias-shift", "stuck-at", "noise-burst"])
    gend.add_argument("--magnitude", type=float, default=10.0)
    gend.add_argument("--seed", type=int, default=1)

    genm = sub.add_parser("gen-model", help="write fresh weights files")
    genm.add_argument("--out", help="weights file path (single model)")
    genm.add_argument("--grid-dir", help="write all 18 grid models here instead")
    genm.add_argument("--id", default="C4D3U32", help="model id, C{c}D{d}U{u}")
    genm.add_argument("--input-dim", type=int, default=8)
    genm.add_argument("--init", default="zero", choices=["zero", "random"])
    genm.add_argument("--seed", type=int, default=0)
    genm.add_argument("--calibrate", default=None,
                      help="dataset CSV for threshold calibration")
    genm.add_argument("--percentile", type=float, default=5.0)

    return parser


def _cmd_run(args) -> int:
    config = parse_campaign_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    audit_path = out / "audit.jsonl" if args.audit else None
    rows = run_campaign(config, workers=args.workers, audit_path=audit_path)
    write_results_csv(rows, out / "results.csv")
    print(f"wrote {out / 'results.csv'} ({len(rows)} rows)")
    return 0


def _cmd_census(args) -> int:
    census = bit_census(load_model(args.model))
    Path(args.out).write_text(census.to_csv_text())
    print(f"wrote {args.out}")
    return 0


def _cmd_histogram(args) -> int:
    model = load_model(args.model)
    plan = load_output_plan(args.plan)
    dataset = load_dataset(args.data)
    hists = masked_output_histogram(model, plan, dataset, args.bins,
                                    base_seed=args.seed)
    text = histogram_csv_text(hists)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    return 0


def _cmd_plotdata(args) -> int:
    rows = read_results_csv(args.rows)
    header, table = emit_plot_data(rows, args.kind)
    write_plot_csv(header, table, args.out)
    print(f"wrote {args.out} ({len(table)} rows)")
    return 0


def _cmd_gen_data(args) -> int:
    spec = SyntheticSpec(
        n_channels=args.channels, window_len=args.window, n_nominal=args.nominal,
        n_anomalous=args.anomalous, anomaly_kind=args.kind,
        magnitude=args.magnitude, seed=args.seed,
    )
    paths = generate_synthetic(spec, args.out_dir)
    for split, p in paths.items():
        print(f"wrote {p} ({split})")
    return 0


def _cmd_gen_model(args) -> int:
    if (args.out is None) == (args.grid_dir is None):
        raise ConfigurationError("exactly one of --out or --grid-dir is required")
    val = load_dataset(args.calibrate) if args.calibrate else None

    def make(definition):
        model = new_model(definition, init=args.init, seed=args.seed)
        if val is not None:
            model = calibrate_threshold(model, val, args.percentile)
        return model

    if args.out is not None:
        definition = parse_model_id(args.id, args.input_dim)
        save_model(make(definition), args.out)
        print(f"wrote {args.out}")
        return 0
    grid_dir = Path(args.grid_dir)
    grid_dir.mkdir(parents=True, exist_ok=True)
    template = parse_model_id("C4D3U32", args.input_dim)
    for entry in build_model_grid(template):
        path = grid_dir / f"{entry.model_id}.rnvp"
        save_model(make(entry.definition), path)
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "census": _cmd_census,
    "histogram": _cmd_histogram,
    "plotdata": _cmd_plotdata,
    "gen-data": _cmd_gen_data,
    "gen-model": _cmd_gen_model,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.verb](args)
    except ConfigurationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (FlowFiError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
