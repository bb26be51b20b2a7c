# %% A small Monte-Carlo sweep over pixel noise (use the CLI for the full 100-trial version)
import numpy as np

from fundmat import run_sweep

res = run_sweep("noise", 1, grid=[0.0, 0.5, 1.0, 2.0], trials=5, base_seed=0)
print(res.to_csv())

for m in ("EightPoint", "Global"):
    sig, e = res.series(m, "mean_e_init")
    print(m, "slope of e_init against sigma:", np.polyfit(sig, e, 1)[0])

try:
    import matplotlib.pyplot as plt
except ImportError:
    plt = None
if plt is not None:
    for m in ("EightPoint", "Global"):
        plt.plot(*res.series(m, "mean_e_init"), "o-", label=m)
    plt.xlabel("sigma [px]")
    plt.ylabel("mean e_Init [px]")
    plt.legend()
    plt.savefig("noise_sweep.png")
    print("wrote noise_sweep.png")
