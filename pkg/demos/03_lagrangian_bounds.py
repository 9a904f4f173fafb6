# %% [markdown]
# # Bounds during the subgradient search
# Every iteration solves the two relaxed subproblems, repairs the relaxed
# point into a feasible deployment and moves the multipliers. The relaxed
# value bounds the optimum from above; the best repaired deployment bounds it
# from below.

# %%
from oreo import EngineParams, ScenarioParams, generate_scenario, solve, solve_exact

cat = generate_scenario(ScenarioParams(scale="S", seed=12))
plan = solve(cat, params=EngineParams(Delta=1e-4))
exact = solve_exact(cat)

# %%
print(f"stop reason: {plan.stop_reason} after {plan.iterations} iterations")
for row in plan.trace[:: max(1, len(plan.trace) // 15)]:
    print(f"it={row['iteration']:3d}  upper={row['upper_bound']:8.4f}  best={row['lower_bound']:8.4f}"
          f"  gap={row['gap']:.4f}  mu={row['mu']:.4f}")

# %%
print(f"heuristic {plan.objective:.4f} <= optimum {exact.objective:.4f} <= bound {plan.upper_bound:.4f}")
print(f"approximation ratio {plan.objective / exact.objective:.4f}")
