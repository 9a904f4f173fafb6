# %% [markdown]
# # Reconfiguring between epochs
# Services that stay requested across epochs must not be interrupted: while a
# continuing service moves to new instances, the old and new ones run side by
# side and together must fit the budget.

# %%
from oreo import DeploymentState, ScenarioParams, check_feasibility, generate_scenario, solve
from oreo.experiment import EpochSequence
from oreo.state import transition_budget_check, transition_sets

full = generate_scenario(ScenarioParams(scale="M", seed=4))
seq = EpochSequence.draw(full, epochs=4, seed=4)
state = DeploymentState.empty()

# %%
for epoch in range(4):
    alive = seq.alive(epoch)
    cat = full.restrict(alive)
    state = DeploymentState(state.previous, frozenset(state.previous.deployed_services() & set(alive)))
    plan = solve(cat, state)
    old, new = transition_sets(state, plan.assignment)
    print(f"epoch {epoch}: requested={len(alive)} continuing={sorted(state.continuing)} "
          f"deployed={len(plan.assignment.deployed_services())}")
    print(f"   kept instances={len(old & new)} retired={len(old - new)} started={len(new - old)} "
          f"transition ok={not transition_budget_check(old, new, state, plan.assignment, cat)} "
          f"checker ok={check_feasibility(plan.assignment, state, cat).feasible}")
    state = DeploymentState(plan.assignment, frozenset())
