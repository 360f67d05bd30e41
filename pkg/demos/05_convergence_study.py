"""A small MSE study: last iterate against its Cesaro average.

This is the library version of ``sobol-mirror bench``.  Twenty replicates
keep it under a minute; the acceptance suite runs the same study with 100.
"""

# %%
import numpy as np

from sobol_mirror.experiments import BenchConfig, loglog_slope, mse_study

cfg = BenchConfig.from_dict(
    {"model": "disc2", "methods": ["mirror", "pf1"], "strategies": ["unif", "avg"], "replicates": 20, "master_seed": 5}
)
study = mse_study(cfg)

# %%
for method, label in (("mirror", "unif"), ("mirror", "avg"), ("pf1", "pf-budget=evals")):
    h, mse = study.curve(method, label)
    print(f"{method:6s} {label:16s} slope {loglog_slope(h, mse):6.2f}   " + " ".join(f"{v:.1e}" for v in mse))
print("horizons:", np.array(cfg.grid()))
