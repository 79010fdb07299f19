"""
Batch pairing and mixing schedules
==================================

STDW walks two neighbouring domains at once.  At inner step ``t`` it takes
batch ``i(t)`` of the previous domain and batch ``j(t)`` of the current one,
and mixes their losses with a weight ``rho``.
"""
# %%
# A pair plan for 3 left batches and 4 right batches.  Indices are 1-based.
from stdw import build_pair_plan, make_rho_schedule

plan = build_pair_plan(3, 4, 12)
print(plan.pairs)

# %%
# Every left batch is visited once per sweep of ``n`` steps; the right index
# shifts by one after each sweep so different pairings appear over time.
for t, (i, j) in enumerate(plan.pairs):
    print(f"t={t:2d}  left={i}  right={j}")

# %%
# Mixing schedules with s = 4 migration steps give s + 1 stages each.
for kind in ("equal", "fixed", "rand", "sorted"):
    sched = make_rho_schedule(kind, 4, seed=7)
    print(f"{kind:7s}", [round(v, 3) for v in sched.values])
