import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from driftsquint.tables import from_csv
from driftsquint.util import mkdirp, resolve

# usage: python plot_regret.py <directory written by `driftsquint run`/`bounds`>
root = sys.argv[1] if len(sys.argv) > 1 else "."


def column(table, field):
    return np.array([np.nan if v == "" else v for v in table.values(field)], dtype=float)


run = from_csv(resolve("run.csv", root))
rounds = column(run, "t")
regrets = [field for field in run.header() if field.startswith("r_")]

figure, (top, bottom) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
for field in regrets:
    top.plot(rounds, np.cumsum(column(run, field)), label="expert %s" % field[2:])
top.set_ylabel("cumulative regret")
top.legend(loc="best", fontsize="small")

mixed = column(run, "ghat")
if not np.all(np.isnan(mixed)):
    bottom.plot(rounds, np.nancumsum(mixed))
bottom.set_ylabel("cumulative mix loss")
bottom.set_xlabel("round")

mkdirp(resolve("figures", root))
figure.tight_layout()
figure.savefig(resolve("figures/regret.png", root), dpi=150)
print("wrote %s" % resolve("figures/regret.png", root))

if os.path.exists(resolve("bounds.csv", root)):
    bounds = from_csv(resolve("bounds.csv", root))
    figure, axis = plt.subplots(figsize=(6, 6))
    for name in sorted(set(bounds.values("bound_name"))):
        rows = bounds.selecteq("bound_name", name)
        axis.scatter(column(rows, "bound"), column(rows, "R"), s=4, label=name)
    limit = axis.get_xlim()
    axis.plot(limit, limit, color="black", linewidth=0.5)
    axis.set_xlabel("bound")
    axis.set_ylabel("measured interval regret")
    axis.legend(loc="best", fontsize="small")
    figure.tight_layout()
    figure.savefig(resolve("figures/bounds.png", root), dpi=150)
    print("wrote %s" % resolve("figures/bounds.png", root))
