"""Experiment orchestration: repeated seeded runs, grids, reports on disk.

Output files
------------
``report.json``
    ``config`` (flat snapshot accepted by :meth:`ExperimentConfig.from_dict`),
    ``repeats`` (one entry per seed with per-domain ``accuracy`` and
    ``error_rate`` lists), ``target`` and ``per_domain`` summaries
    (``mean``, ``sd``, ``ci95``, ``n``) and ``wall_seconds``.
``accuracy.csv``
    ``repeat, seed, domain_t, accuracy, error_rate``; one row per repeat and domain.
``trace.csv``
    ``repeat`` followed by ``method, domain_t, rho, step, loss_mixed,
    loss_left, loss_right``.  Empty cells mean "not applicable" (GST and
    direct runs have no mixing weight or left batch).
``grid.csv``
    One row per grid row key, then ``s<col>_mean`` and ``s<col>_ci95`` for
    every column value.  SD/CI cells are empty when ``repeats == 1``.
"""
from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .adapt import METHODS, TRACE_COLUMNS, AdaptConfig, run_method, _cell
from .domains import (
    gen_intensity_shift, gen_rotating_moons, load_idx_images, make_rotated_sequence,
)
from .errors import ConfigError
from .metrics import evaluate, evaluate_domain, summarize

DATASETS = ("moons", "intensity", "idx")
GRID_ROW_KEYS = {"sweep": "given_domains", "ablate": "schedule"}

__all__ = [
    "ExperimentConfig", "RunReport", "evaluate", "run_experiment", "sweep_intermediates",
    "ablate_schedules", "build_sequence", "parse_config_file",
]


@dataclass
class ExperimentConfig:
    dataset: str = "moons"
    n_domains: int = 13
    shift_start: float = 0.0
    shift_end: float = 120.0
    samples_per_domain: int = 500
    noise_sd: float = 0.1
    idx_images: str | None = None
    idx_labels: str | None = None
    idx_limit: int | None = None
    method: str = "stdw"
    repeats: int = 1
    seed: int = 0
    out: str | None = None
    adapt: AdaptConfig = field(default_factory=AdaptConfig)

    def validate(self) -> "ExperimentConfig":
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; choose from {', '.join(DATASETS)}")
        if self.dataset == "idx" and not (self.idx_images and self.idx_labels):
            raise ConfigError("the idx dataset needs both idx_images and idx_labels")
        if self.dataset != "idx" and (self.idx_images or self.idx_labels):
            raise ConfigError("idx paths given but dataset is not 'idx'")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        self.adapt.validate()
        return self

    def to_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "adapt"}
        d.update(self.adapt.to_dict())
        d.pop("seed", None)
        d["seed"] = self.seed
        return d

    @classmethod
    def from_dict(cls, d) -> "ExperimentConfig":
        own = {f.name for f in fields(cls)} - {"adapt"}
        adapt_names = {f.name for f in fields(AdaptConfig)} - {"seed"}
        unknown = set(d) - own - adapt_names
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**{k: v for k, v in d.items() if k in own})
        cfg.adapt = AdaptConfig.from_dict({k: v for k, v in d.items() if k in adapt_names})
        return cfg

    def with_updates(self, **kw) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.to_dict(), **kw})


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` starts a comment.

    Values are parsed as JSON when possible (numbers, ``true``, ``null``,
    ``[64, 64]``) and kept as bare strings otherwise.
    """
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value.strip("\"'")
    return out


def build_sequence(cfg: ExperimentConfig, seed: int):
    if cfg.dataset == "moons":
        return gen_rotating_moons(cfg.n_domains, cfg.shift_start, cfg.shift_end,
                                  cfg.samples_per_domain, cfg.noise_sd, seed)
    if cfg.dataset == "intensity":
        return gen_intensity_shift(cfg.n_domains, cfg.shift_start, cfg.shift_end,
                                   cfg.samples_per_domain, seed)
    images, labels = load_idx_images(cfg.idx_images, cfg.idx_labels)
    if cfg.idx_limit:
        images, labels = images[:cfg.idx_limit], labels[:cfg.idx_limit]
    return make_rotated_sequence(images, labels, cfg.n_domains, cfg.shift_start, cfg.shift_end,
                                 cfg.samples_per_domain, seed)


@dataclass
class RunReport:
    config: dict
    repeats: list
    target: dict
    per_domain: list
    wall_seconds: float
    traces: list = field(default_factory=list, repr=False)

    @property
    def target_accuracies(self) -> list[float]:
        return [r["accuracy"][-1] for r in self.repeats]

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "repeats": self.repeats,
            "target": self.target,
            "per_domain": self.per_domain,
            "wall_seconds": self.wall_seconds,
        }

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(self.to_json(), indent=2))
        with open(out / "accuracy.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["repeat", "seed", "domain_t", "accuracy", "error_rate"])
            for r in self.repeats:
                for t, (acc, err) in enumerate(zip(r["accuracy"], r["error_rate"])):
                    w.writerow([r["repeat"], r["seed"], t, repr(acc), repr(err)])
        with open(out / "trace.csv", "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["repeat", *TRACE_COLUMNS])
            for r, trace in enumerate(self.traces):
                for row in trace.rows():
                    w.writerow([r] + [_cell(v) for v in row])
        return out


def _check_writable(out_dir):
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc


def run_experiment(cfg: ExperimentConfig) -> RunReport:
    """Run ``cfg.method`` once per seed ``cfg.seed + r`` and aggregate.

    The domain sequence is regenerated from the same repeat seed, so a repeat
    varies both the data draw and the training randomness.
    """
    cfg.validate()
    if cfg.out is not None:
        _check_writable(cfg.out)
    start = time.perf_counter()
    repeats, traces = [], []
    for r in range(cfg.repeats):
        seed = cfg.seed + r
        seq = build_sequence(cfg, seed)
        model, trace = run_method(cfg.method, seq, replace(cfg.adapt, seed=seed))
        scores = [evaluate_domain(model, dom) for dom in seq.domains]
        repeats.append({
            "repeat": r,
            "seed": seed,
            "accuracy": [s[0] for s in scores],
            "error_rate": [s[1] for s in scores],
            "accuracy_after_stage": [trace.accuracy[t] for t in sorted(trace.accuracy)],
        })
        traces.append(trace)
    n_dom = len(repeats[0]["accuracy"])
    report = RunReport(
        config=cfg.to_dict(),
        repeats=repeats,
        target=summarize([r["accuracy"][-1] for r in repeats]),
        per_domain=[summarize([r["accuracy"][t] for r in repeats]) for t in range(n_dom)],
        wall_seconds=time.perf_counter() - start,
        traces=traces,
    )
    if cfg.out is not None:
        report.write(cfg.out)
    return report


def _write_grid(path, row_key, rows, cols, cells):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        header = [row_key]
        for c in cols:
            header += [f"s{c}_mean", f"s{c}_ci95"]
        w.writerow(header)
        for rv in rows:
            line = [rv]
            for c in cols:
                tgt = cells[(rv, c)].target
                line += [repr(tgt["mean"]), "" if tgt["ci95"] is None else repr(tgt["ci95"])]
            w.writerow(line)


def _run_grid(base, kind, rows, cols, make_cfg):
    if not rows or not cols:
        raise ConfigError(f"{kind} needs non-empty row and column lists")
    out = Path(base.out) if base.out is not None else None
    if out is not None:
        _check_writable(out)
    cells = {}
    for rv in rows:
        for c in cols:
            cell_cfg = make_cfg(rv, c)
            if out is not None:
                cell_cfg.out = str(out / f"{GRID_ROW_KEYS[kind]}_{rv}_s{c}")
            cells[(rv, c)] = run_experiment(cell_cfg)
    if out is not None:
        _write_grid(out / "grid.csv", GRID_ROW_KEYS[kind], rows, cols, cells)
    return cells


def sweep_intermediates(base: ExperimentConfig, given_domain_counts, stdw_inner_steps):
    """STDW target accuracy for each (number of given domains, migration steps) cell."""
    return _run_grid(
        base, "sweep", list(given_domain_counts), list(stdw_inner_steps),
        lambda n, s: base.with_updates(n_domains=n, steps=s, method="stdw", out=None),
    )


def ablate_schedules(base: ExperimentConfig, kinds, step_counts):
    """STDW target accuracy for each (schedule kind, migration steps) cell."""
    return _run_grid(
        base, "ablate", list(kinds), list(step_counts),
        lambda k, s: base.with_updates(schedule=k, steps=s, method="stdw", out=None),
    )
