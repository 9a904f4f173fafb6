# %% [markdown]
# # Performance model
# Each xApp is a single-server queue. Its latency depends on the CPU it gets,
# how much work one CPU cycle does (theta), and the summed input rate of every
# service routed through it.

# %%
import numpy as np

from oreo import canned_testbed_scenario, config_quality, required_cpu, service_latency, xapp_latency

# %% Latency falls off hyperbolically as CPU grows past the stability point.
theta, load = 1.5, 4.0
for cpu in np.linspace(load / theta + 0.5, 10, 6):
    print(f"cpu={cpu:5.2f}  latency={xapp_latency(cpu, theta, load):.4f} s")

# %% Going the other way: the CPU that hits a deadline exactly.
for target in (0.1, 0.2, 0.5):
    cpu = required_cpu(theta, load, target)
    print(f"target={target}  cpu={cpu:.3f}  check={xapp_latency(cpu, theta, load):.3f}")

# %% [markdown]
# Sharing one instance between two services adds their loads. Serving both
# from one queue needs less CPU than two separate queues with the same deadline.

# %%
a, b, T = 3.0, 2.0, 0.1
print("shared  :", required_cpu(theta, a + b, T))
print("separate:", required_cpu(theta, a, T) + required_cpu(theta, b, T))

# %% [markdown]
# Quality flows through the configuration graph: each node multiplies its own
# base quality by the weakest input it receives. Latency is the slowest path.

# %%
cat = canned_testbed_scenario()
slicing = cat.services["slicing"]
for cfg in slicing.configs:
    top = {f: cat.xapp(f, 3) for f in cfg.nodes}
    low = {f: cat.xapp(f, 1) for f in cfg.nodes}
    lat = {f: 0.03 for f in cfg.nodes}
    print(f"{cfg.id}: paths={list(cfg.paths)}  quality chi=1 {config_quality(cfg, low)[1]:.3f}"
          f"  chi=3 {config_quality(cfg, top)[1]:.3f}  latency {service_latency(cfg, lat):.2f} s")
