"""Command line front end: ``stdw {generate,train,sweep,ablate,lyapunov}``."""
from __future__ import annotations

import argparse
import json
import sys

from .domains import export_sequence
from .errors import StdwError
from .harness import (
    ExperimentConfig, ablate_schedules, build_sequence, parse_config_file, run_experiment,
    sweep_intermediates,
)
from .lyapunov import lyapunov_check

# flag dest -> config key
_FLAG_KEYS = {
    "seed": "seed", "method": "method", "schedule": "schedule", "steps": "steps",
    "epochs": "epochs", "batch_size": "batch_size", "out": "out", "repeats": "repeats",
    "gst_drop_fraction": "gst_drop_fraction", "idx_images": "idx_images",
    "idx_labels": "idx_labels", "dataset": "dataset", "n_domains": "n_domains",
    "shift_start": "shift_start", "shift_end": "shift_end",
    "samples_per_domain": "samples_per_domain", "learning_rate": "learning_rate",
    "fixed_value": "fixed_value",
}


def _int_list(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _str_list(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _add_experiment_flags(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--method", choices=["stdw", "gst", "direct"])
    p.add_argument("--schedule", choices=["equal", "fixed", "rand", "sorted"])
    p.add_argument("--fixed-value", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--out")
    p.add_argument("--repeats", type=int)
    p.add_argument("--gst-drop-fraction", type=float)
    p.add_argument("--dataset", choices=["moons", "intensity", "idx"])
    p.add_argument("--n-domains", type=int)
    p.add_argument("--shift-start", type=float)
    p.add_argument("--shift-end", type=float)
    p.add_argument("--samples-per-domain", type=int)
    p.add_argument("--idx-images")
    p.add_argument("--idx-labels")


def _experiment_config(args) -> ExperimentConfig:
    values = parse_config_file(args.config) if args.config else {}
    for dest, key in _FLAG_KEYS.items():
        v = getattr(args, dest, None)
        if v is not None:
            values[key] = v
    if values.get("idx_images") and "dataset" not in values:
        values["dataset"] = "idx"
    return ExperimentConfig.from_dict(values)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stdw", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a domain sequence as CSV files")
    _add_experiment_flags(p)

    p = sub.add_parser("train", help="run one method with one config")
    _add_experiment_flags(p)

    p = sub.add_parser("sweep", help="grid over given-domain counts and migration steps")
    _add_experiment_flags(p)
    p.add_argument("--counts", type=_int_list, default=[2, 3, 4, 5, 6])
    p.add_argument("--steps-list", type=_int_list, default=[0, 1, 2, 3, 4])

    p = sub.add_parser("ablate", help="grid over rho schedule kinds and migration steps")
    _add_experiment_flags(p)
    p.add_argument("--kinds", type=_str_list, default=["equal", "fixed", "rand", "sorted"])
    p.add_argument("--step-counts", type=_int_list, default=[1, 2, 3, 4])

    p = sub.add_parser("lyapunov", help="gradient-descent Lyapunov decrease check")
    p.add_argument("--dim", type=int, default=10)
    p.add_argument("--mu", type=float, default=0.1)
    p.add_argument("--L", type=float, default=1.0)
    p.add_argument("--eta", type=float, default=0.15)
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bound", choices=["squared", "literal"], default="squared")
    return parser


def _summary_line(report):
    t = report.target
    ci = "" if t["ci95"] is None else f" +/- {t['ci95']:.4f}"
    return f"target accuracy {t['mean']:.4f}{ci} over {t['n']} repeat(s)"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "lyapunov":
            res = lyapunov_check(args.dim, args.mu, args.L, args.eta, args.iters, args.seed,
                                 bound=args.bound)
            print(json.dumps({"violations": res.violations, "V_first": res.values[0],
                              "V_last": res.values[-1], "steps": args.iters}))
            return 0 if res.violations == 0 else 1
        cfg = _experiment_config(args)
        if args.command == "generate":
            cfg.validate()
            seq = build_sequence(cfg, cfg.seed)
            out = export_sequence(seq, cfg.out or "sequence")
            print(f"wrote {len(seq)} domains to {out}")
        elif args.command == "train":
            print(_summary_line(run_experiment(cfg)))
        elif args.command == "sweep":
            cells = sweep_intermediates(cfg, args.counts, args.steps_list)
            for (n, s), rep in cells.items():
                print(f"given_domains={n} s={s}: {_summary_line(rep)}")
        elif args.command == "ablate":
            cells = ablate_schedules(cfg, args.kinds, args.step_counts)
            for (k, s), rep in cells.items():
                print(f"schedule={k} s={s}: {_summary_line(rep)}")
    except StdwError as exc:
        print(f"error[{exc.category}]: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error[io]: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
