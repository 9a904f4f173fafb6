# %% [markdown]
# # A small experiment
# Replay several seeded scenarios through all three policies, then aggregate
# means and 90% confidence intervals. The same pipeline backs the `run` and
# `compare` CLI subcommands.

# %%
from oreo import ScenarioParams, run_experiment, summarize
from oreo.experiment import reports_to_csv

reports = run_experiment(ScenarioParams(scale="S"), ("oreo", "exact", "baseline"), runs=6, epochs=2, seed=0)
print(reports_to_csv(reports).splitlines()[0])
print(f"{len(reports)} rows")

# %%
for row in summarize(reports):
    line = (f"{row['policy']:8s} objective {row['objective_mean']:.3f} +- {row['objective_ci90']:.3f}  "
            f"xapps {row['xapp_count_mean']:.1f}  cpu {row['cpu_util_mean']:.2f}")
    if row["policy"] == "oreo":
        line += f"  ratio {row['alpha_mean']:.3f} (min {row['alpha_min']:.3f}, n={row['alpha_n']})"
    print(line)
