"""Run the full comparison on a one-year synthetic archive and print the tables.

Takes about half a minute. The same run is available from the shell as
``cobase run --out results --config demos/small.json``.
"""
from cobase import SyntheticConfig
from cobase.experiment import RunConfig, run_experiment, DM_ORIENTATION

config = RunConfig(
    synthetic=SyntheticConfig(n_stations=3, n_days=365, M=17, seed=1),
    N=17,
    base_seed=1,
)
table = run_experiment(config)

print(f"{'method':16s} {'CRPS':>8s} {'ES':>8s} {'VS':>8s}")
for group, method, margin, crps, es, vs in table.score_rows():
    if margin == "":
        print(f"{method:16s} {crps:8.4f} {es:8.4f} {vs:8.4f}")

print()
print(DM_ORIENTATION)
for group, kind, margin, method, baseline, dm, n in table.dm_rows():
    if kind != "CRPS" or method == "EMOS-Q":
        label = f"{kind} {margin}".strip()
        print(f"{method:15s} vs {baseline:11s} {label:12s} {dm:7.2f}  ({n} dates)")

print()
print("audits:", table.audits)
