"""Rank-based drift with no closed-form limit.

The limit law is approximated by a Picard-iterated law cloud, and the tail is
normalised empirically from that cloud. Interacting and i.i.d. maxima should
still be indistinguishable.
"""

import tempfile

from mfextremes.harness import load_config, render_report, run_experiment

overrides = [
    "name=rank_based",
    "model=rankbased",
    "profile_slope=1",
    "profile_intercept=-0.5",
    "n_particles=300",
    "replications=200",
    "cloud_size=20000",
    "norming=empirical",
    "workers=1",
]
cfg = load_config(None, overrides)
with tempfile.TemporaryDirectory() as out:
    report = run_experiment(cfg, out)
print("law:", report.summary["law"])
print(render_report(report))
