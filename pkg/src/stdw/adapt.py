"""Adaptation algorithms: STDW, gradual self-training (GST) and direct adaptation.

All three start from the same source-trained network.  STDW walks every
neighbouring pair of domains, pairs their mini-batches cyclically and mixes
the two per-batch losses with a weight that moves from the previous domain
(rho = 0) to the current one (rho = 1).  GST relabels each domain in one pass
with the frozen previous model, filters low-confidence samples and refits.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .domains import DomainSequence, partition_batches
from .errors import ConfigError, UsageError
from .metrics import evaluate_domain
from .nn_core import (
    Model, OptimState, backward_apply, ce_loss_and_grad, forward, init_model,
)
from .pseudo_label import LabeledBatch, confidence_filter, label_batch_dynamic
from .schedule import SCHEDULE_KINDS, build_pair_plan, make_rho_schedule

METHODS = ("stdw", "gst", "direct")
TRACE_COLUMNS = ("method", "domain_t", "rho", "step", "loss_mixed", "loss_left", "loss_right")


@dataclass
class AdaptConfig:
    steps: int = 4
    epochs: int = 2
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    schedule: str = "equal"
    fixed_value: float = 0.5
    seed: int = 0
    gst_drop_fraction: float = 0.1
    hidden: tuple = (64, 64)
    # supervised epochs on the source before adapting; None reuses `epochs`.
    # Longer pretraining makes the source model overconfident and changes
    # which schedule kind wins on short two-domain tasks.
    source_epochs: int | None = 30

    def validate(self) -> "AdaptConfig":
        if int(self.steps) != self.steps or self.steps < 0:
            raise ConfigError(f"steps must be a non-negative integer, got {self.steps}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.schedule not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if not 0.0 <= self.fixed_value <= 1.0:
            raise ConfigError("fixed_value must lie in [0, 1]")
        if not 0.0 <= self.gst_drop_fraction < 1.0:
            raise ConfigError("gst_drop_fraction must lie in [0, 1)")
        if any(int(h) < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.source_epochs is not None and self.source_epochs < 0:
            raise ConfigError("source_epochs must be >= 0")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d) -> "AdaptConfig":
        names = {f.name for f in fields(cls)}
        kw = {k: v for k, v in d.items() if k in names}
        if "hidden" in kw:
            kw["hidden"] = tuple(kw["hidden"])
        return cls(**kw)

    def make_optimizer(self) -> OptimState:
        return OptimState(self.optimizer, self.learning_rate)


@dataclass
class StepRecord:
    method: str
    domain_t: int
    rho: float
    step: int
    loss_mixed: float
    loss_left: float
    loss_right: float
    left_batch: int = 0
    right_batch: int = 0


@dataclass
class AdaptTrace:
    method: str
    records: list[StepRecord] = field(default_factory=list)
    accuracy: dict[int, float] = field(default_factory=dict)
    pair_plans: list = field(default_factory=list)

    def rows(self):
        for r in self.records:
            yield [r.method, r.domain_t, r.rho, r.step, r.loss_mixed, r.loss_left, r.loss_right]

    def write_csv(self, path, extra=None) -> None:
        """Write the trace; ``extra`` is an optional (column, value) prefix."""
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(([extra[0]] if extra else []) + list(TRACE_COLUMNS))
            for row in self.rows():
                w.writerow(([extra[1]] if extra else []) + [_cell(v) for v in row])


def _cell(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _rng(*key):
    return np.random.default_rng([int(k) & 0xFFFFFFFFFFFFFFFF for k in key])


def _subseed(*key) -> int:
    return int(_rng(*key).integers(0, 2**63 - 1))


# -- single updates -------------------------------------------------------------

@dataclass(frozen=True)
class StepLosses:
    mixed: float
    left: float
    right: float


def self_training_step(model: Model, opt: OptimState, domain, batch):
    """One update on a single batch labelled by the current model (or ground truth)."""
    lb = label_batch_dynamic(model, domain, batch)
    x = domain.x[lb.indices]
    loss, dlogits = ce_loss_and_grad(forward(model, x), lb.labels)
    return backward_apply(model, x, dlogits, opt), loss


def phi_step(model: Model, opt: OptimState, left, right, rho: float):
    """One optimizer step on ``(1 - rho) * CE(left) + rho * CE(right)``.

    ``left`` and ``right`` are ``(domain, batch_indices)`` pairs.  Both
    batches are labelled by the pre-update model.  A batch whose weight is
    zero is left out of the backward pass entirely, so ``rho`` of 0 or 1
    reproduces :func:`self_training_step` exactly.
    """
    if not 0.0 <= rho <= 1.0:
        raise UsageError(f"rho must lie in [0, 1], got {rho}")
    (ldom, lidx), (rdom, ridx) = left, right
    if len(lidx) == 0 or len(ridx) == 0:
        raise UsageError("phi_step needs non-empty batches")
    lb = label_batch_dynamic(model, ldom, lidx)
    rb = label_batch_dynamic(model, rdom, ridx)
    xl, xr = ldom.x[lb.indices], rdom.x[rb.indices]
    loss_l, dl = ce_loss_and_grad(forward(model, xl), lb.labels)
    loss_r, dr = ce_loss_and_grad(forward(model, xr), rb.labels)
    parts = []
    if rho < 1.0:
        parts.append((xl, (1.0 - rho) * dl))
    if rho > 0.0:
        parts.append((xr, rho * dr))
    if len(parts) == 1:
        x, g = parts[0]
    else:
        x = np.vstack([p[0] for p in parts])
        g = np.vstack([p[1] for p in parts])
    new = backward_apply(model, x, g, opt)
    return new, StepLosses((1.0 - rho) * loss_l + rho * loss_r, loss_l, loss_r)


def fit_supervised(model, opt, x, y, epochs, batch_size, seed, trace=None, domain_t=0):
    """Minibatch cross-entropy fit on fixed labels."""
    step = 0
    for epoch in range(epochs):
        plan = partition_batches(len(x), batch_size, _subseed(seed, epoch))
        for idx in plan.batches:
            loss, dlogits = ce_loss_and_grad(forward(model, x[idx]), y[idx])
            model = backward_apply(model, x[idx], dlogits, opt)
            if trace is not None:
                trace.records.append(
                    StepRecord(trace.method, domain_t, math.nan, step, loss, math.nan, loss)
                )
            step += 1
    return model


def source_model(seq: DomainSequence, cfg: AdaptConfig):
    """Initialise and train on the labelled source domain."""
    model = init_model([seq.d, *cfg.hidden], seq.k, _subseed(cfg.seed, 1))
    opt = cfg.make_optimizer()
    src = seq[0]
    epochs = cfg.epochs if cfg.source_epochs is None else cfg.source_epochs
    model = fit_supervised(model, opt, src.x, src.y, epochs, cfg.batch_size, _subseed(cfg.seed, 2))
    return model, opt


def stage_rhos(cfg: AdaptConfig, t: int) -> tuple[float, ...]:
    """Mixing weights used for transition ``t``; ``steps == 0`` means a single rho = 1 stage."""
    if cfg.steps == 0:
        return (1.0,)
    return make_rho_schedule(cfg.schedule, cfg.steps, _subseed(cfg.seed, 3, t), cfg.fixed_value).values


# -- full algorithms -------------------------------------------------------------

def stdw_adapt(seq: DomainSequence, cfg: AdaptConfig, model=None, opt=None):
    cfg.validate()
    if model is None:
        model, opt = source_model(seq, cfg)
    elif opt is None:
        opt = cfg.make_optimizer()
    trace = AdaptTrace("stdw")
    trace.accuracy[0] = evaluate_domain(model, seq[0])[0]
    for t in range(1, len(seq)):
        left, right = seq[t - 1], seq[t]
        for stage, rho in enumerate(stage_rhos(cfg, t)):
            lplan = partition_batches(left, cfg.batch_size, _subseed(cfg.seed, 4, t, stage, 0))
            rplan = partition_batches(right, cfg.batch_size, _subseed(cfg.seed, 4, t, stage, 1))
            plan = build_pair_plan(len(lplan), len(rplan), len(rplan) * cfg.epochs)
            trace.pair_plans.append(plan)
            for k, (i, j) in enumerate(plan.pairs):
                model, losses = phi_step(
                    model, opt, (left, lplan.batches[i - 1]), (right, rplan.batches[j - 1]), rho
                )
                trace.records.append(
                    StepRecord("stdw", t, rho, k, losses.mixed, losses.left, losses.right, i, j)
                )
        trace.accuracy[t] = evaluate_domain(model, right)[0]
    return model, trace


def gst_adapt(seq: DomainSequence, cfg: AdaptConfig, model=None, opt=None, method="gst"):
    cfg.validate()
    if model is None:
        model, opt = source_model(seq, cfg)
    elif opt is None:
        opt = cfg.make_optimizer()
    trace = AdaptTrace(method)
    trace.accuracy[0] = evaluate_domain(model, seq[0])[0]
    for t in range(1, len(seq)):
        dom = seq[t]
        # one-shot labelling with the frozen previous model
        labeled: LabeledBatch = label_batch_dynamic(model, dom, np.arange(len(dom)))
        kept = confidence_filter(labeled, cfg.gst_drop_fraction)
        model = fit_supervised(
            model, opt, dom.x[kept.indices], kept.labels, cfg.epochs, cfg.batch_size,
            _subseed(cfg.seed, 5, t), trace=trace, domain_t=t,
        )
        trace.accuracy[t] = evaluate_domain(model, dom)[0]
    return model, trace


def direct_adapt(seq: DomainSequence, cfg: AdaptConfig, model=None, opt=None):
    """Self-training straight from source to target, skipping intermediates."""
    return gst_adapt(seq.endpoints(), cfg, model, opt, method="direct")


def run_method(method: str, seq: DomainSequence, cfg: AdaptConfig, model=None, opt=None):
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    fn = {"stdw": stdw_adapt, "gst": gst_adapt, "direct": direct_adapt}[method]
    return fn(seq, cfg, model, opt)
