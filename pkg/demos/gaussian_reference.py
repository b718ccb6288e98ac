"""Walk through one Gaussian mean-field run by hand, then through the harness.

With kappa=1, sigma=sqrt(2) and a standard normal start the limit law is
N(0, 1) at every time, so both the interacting system and its limit copies
should produce Gumbel-like normalised maxima.
"""

import math
import tempfile

from mfextremes import (
    GaussianMeanFieldParams,
    RegionSet,
    SimConfig,
    build_law_cloud,
    build_point_pattern,
    count_in_region,
    gaussian_norming,
    make_gaussian_model,
    ou_moments,
    simulate_iid_copies,
    simulate_interacting,
)
from mfextremes.harness import load_config, render_report, run_experiment

params = GaussianMeanFieldParams(kappa=1.0, sigma=math.sqrt(2.0), m0=0.0, sigma0=1.0)
model = make_gaussian_model(params)
mean, var = ou_moments(params, 1.0)
print(f"limit law at T=1: mean {mean}, variance {var:.6f}")

# one replication of each system
cfg = SimConfig(n_particles=1000, horizon=1.0, steps=100, seed=7)
inter = simulate_interacting(cfg, model)
law = build_law_cloud(cfg, model)  # closed form, no Monte Carlo cloud needed
iid = simulate_iid_copies(cfg, model, law)

norming = gaussian_norming(1000, mean, math.sqrt(var), method="quantile")
print(f"norming a={norming.a:.5f} b={norming.b:.5f}")

upper = RegionSet([(0.0, 1.0, 0.0, math.inf)])
for label, batch in (("interacting", inter), ("iid", iid)):
    pattern = build_point_pattern(batch.endpoints, norming)
    print(f"{label:12s} max {pattern.values.max():+.3f}  points above 0: {count_in_region(pattern, upper)}")

# the same thing at scale, through the harness
overrides = ["replications=300", "workers=1"]
with tempfile.TemporaryDirectory() as out:
    report = run_experiment(load_config(None, overrides), out)
    print(render_report(report))
