# %% [markdown]
# # Deploying the three-service testbed
# Forecasting, classification and slicing draw on three RAN functions. We
# compare the Lagrangian heuristic, the exact oracle and the monolithic
# baseline on the same catalog.

# %%
from oreo import (DeploymentState, canned_testbed_scenario, check_feasibility, solve, solve_baseline,
                  solve_exact)

cat = canned_testbed_scenario(forecast_q=0.925, classify_q=0.8, slicing_q=0.8)
empty = DeploymentState.empty()

plans = {"oreo": solve(cat), "exact": solve_exact(cat), "baseline": solve_baseline(cat)}

# %%
for name, plan in plans.items():
    a = plan.assignment
    feasible = check_feasibility(a, empty, cat).feasible
    print(f"{name:8s} objective={plan.objective:.4f} services={sorted(a.deployed_services())} "
          f"xapps={len(a.rho)} cpu={a.total().cpu:.2f} feasible={feasible}")

# %% [markdown]
# Which instances serve which configurations? Shared instances show up with
# several users.

# %%
a = plans["oreo"].assignment
for inst, users in sorted(a.users().items()):
    print(f"{inst}: cpu={a.rho[inst].cpu:.2f}  used by {users}")

# %% The repair trace explains how the relaxed point became feasible.
for action in plans["oreo"].repair_trace.actions:
    print(action)
