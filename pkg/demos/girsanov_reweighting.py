"""Reweight i.i.d. limit copies into the interacting law.

The weight is the Euler-chain likelihood ratio between the particle system
and N independent limit copies. Its mean is 1 and the spread of its log
stays of order one as N grows.
"""

import math

import numpy as np

from mfextremes import (
    GaussianMeanFieldParams,
    SimConfig,
    build_law_cloud,
    girsanov_weight,
    make_gaussian_model,
    reweighted_expectation,
    simulate_iid_copies,
    simulate_interacting,
)

model = make_gaussian_model(GaussianMeanFieldParams(kappa=1.0, sigma=math.sqrt(2.0)))

for n in (25, 100, 400):
    log_w, maxima_iid, maxima_inter = [], [], []
    for rep in range(400):
        cfg = SimConfig(n_particles=n, horizon=1.0, steps=50, seed=11, replication_id=rep, record_increments=True)
        law = build_law_cloud(cfg, model)
        copies = simulate_iid_copies(cfg, model, law)
        log_w.append(girsanov_weight(copies, law, model).log_weight)
        maxima_iid.append(copies.endpoints.max())
        maxima_inter.append(simulate_interacting(cfg, model).endpoints.max())
    z = np.exp(log_w)
    level = float(np.median(maxima_inter))
    est, se = reweighted_expectation(np.asarray(maxima_iid) <= level, z)
    direct = np.mean(np.asarray(maxima_inter) <= level)
    print(
        f"N={n:4d}  mean weight {z.mean():.3f}  sd log-weight {np.std(log_w):.3f}  "
        f"P(max <= {level:.2f}) reweighted {est:.3f}+-{se:.3f}, direct {direct:.3f}"
    )
