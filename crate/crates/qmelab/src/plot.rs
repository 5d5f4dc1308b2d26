//! Plot script emitted next to the figure data.

/// Renders `fig2a.csv` and `fig2b.csv` from the script's own directory.
pub const FIG2_SCRIPT: &str = r##"import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def load(name):
    with open(os.path.join(HERE, name), newline="") as f:
        rows = list(csv.reader(line for line in f if not line.startswith("#")))
    header, body = rows[0], rows[1:]
    return {h: [float(r[i]) for r in body] for i, h in enumerate(header)}


a = load("fig2a.csv")
b = load("fig2b.csv")
fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))

lam = a["lambda"]
for key in a:
    if key.startswith("log G ") and not key.startswith("log G^R"):
        name = key[len("log G "):]
        (line,) = left.plot(lam, a[key], label=name)
        left.plot(lam, a["log G^R " + name], "--", color=line.get_color())
left.set_xlabel("lambda")
left.set_ylabel("log G (solid), log G^R (dashed)")
left.legend()

t = b["t"]
right.plot(t, b["Q_exact"], "k-", label="exact")
right.plot(t, b["Q_mgf"], label="Q from MGF")
right.plot(t, b["dE_S"], ":", label="Tr[H_S (rho(t) - rho(0))]")
right.plot(t, b["Q_secular"], "--", label="secular")
right.set_xlabel("t")
right.set_ylabel("Q")
right.legend()

fig.tight_layout()
fig.savefig(os.path.join(HERE, "fig2.png"), dpi=150)
"##;
