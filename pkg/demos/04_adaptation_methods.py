"""
Comparing STDW, gradual self-training and direct adaptation
===========================================================

A reduced version of the rotating-moons benchmark so it runs in seconds.
Raise ``samples_per_domain`` and ``repeats`` for the full setting.
"""
# %%
from stdw import ExperimentConfig, run_experiment

base = ExperimentConfig(n_domains=7, shift_end=60.0, samples_per_domain=300, seed=1, repeats=2)
for method in ("direct", "gst", "stdw"):
    report = run_experiment(base.with_updates(method=method))
    t = report.target
    print(f"{method:6s} target accuracy {t['mean']:.3f} (sd {t['sd']:.3f})")

# %%
# The trace of an STDW run records every mixed step.
report = run_experiment(base.with_updates(method="stdw", repeats=1))
trace = report.traces[0]
for rec in trace.records[:3]:
    print(rec.domain_t, rec.rho, round(rec.loss_mixed, 4))
print("accuracy after each domain:", [round(a, 3) for a in report.repeats[0]["accuracy_after_stage"]])

# %%
# Grids over schedule kinds (and, with sweep_intermediates, over the number
# of given domains) reuse the same runner.  One repeat on a small task is
# noisy; compare kinds over several seeds before reading anything into it.
from stdw import ablate_schedules

cells = ablate_schedules(base.with_updates(n_domains=2, shift_end=45.0, repeats=1),
                         ["equal", "fixed"], [4])
for (kind, s), rep in cells.items():
    print(kind, s, round(rep.target["mean"], 3))
