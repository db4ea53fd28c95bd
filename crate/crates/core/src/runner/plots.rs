//! Companion matplotlib scripts for the emitted CSV files.
//!
//! The scripts only read the files written next to them; rendering is left
//! to whoever runs them.

const READERS: &str = r##"import csv
import sys

import matplotlib.pyplot as plt


def read_table(path):
    with open(path) as f:
        lines = [l for l in f if not l.startswith("#")]
    rows = list(csv.reader(lines))
    header, body = rows[0], rows[1:]
    return {name: [float(r[i]) for r in body] for i, name in enumerate(header)}


def read_grid(path):
    with open(path) as f:
        next(f)
        return [[float(x) for x in line.split(",")] for line in f if line.strip()]
"##;

pub(crate) fn entropy_script(files: &[String]) -> String {
    let list = files.iter().map(|f| format!("    {f:?},\n")).collect::<String>();
    format!(
        r##"{READERS}

FILES = [
{list}]

fig, ax = plt.subplots()
for name in FILES:
    t = read_table(name)
    line, = ax.plot(t["t"], t["S_exact"], label=name + " exact")
    ax.plot(t["t"], t["S_pt"], "--", color=line.get_color(), label=name + " 2nd order")
ax.set_xlabel("t")
ax.set_ylabel("linear entropy")
ax.legend(fontsize="small")
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "entropy.png", dpi=150)
"##
    )
}

pub(crate) fn sweep_script() -> &'static str {
    r##"import csv
import sys

import matplotlib.pyplot as plt

with open("rate_sweep.csv") as f:
    rows = list(csv.DictReader(l for l in f if not l.startswith("#")))

fig, ax = plt.subplots()
ok = [r for r in rows if float(r["status"]) == 0]
ax.plot([float(r["k"]) for r in ok], [float(r["ratio"]) for r in ok], "o", label="measured")
ax.plot([float(r["k"]) for r in ok], [float(r["ratio_predicted"]) for r in ok], "x", label="coth(gamma/2)")
ax.axhline(1.0, color="grey", lw=0.5)
ax.set_xlabel("k")
ax.set_ylabel("Gamma / Gamma0")
ax.legend()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else "rate_sweep.png", dpi=150)
"##
}

pub(crate) fn husimi_script(stems: &[String]) -> String {
    let list = stems.iter().map(|s| format!("    {s:?},\n")).collect::<String>();
    format!(
        r##"{READERS}

STEMS = [
{list}]

for stem in STEMS:
    fig, axes = plt.subplots(1, 3, figsize=(13, 4))
    axes[0].imshow(read_grid("density_" + stem + ".csv"), origin="upper")
    axes[0].set_title("|rho| " + stem)
    for ax, scale in zip(axes[1:], ["normal", "log"]):
        grid = read_grid("husimi_" + scale + "_" + stem + ".csv")
        ax.imshow(grid, origin="upper", extent=(0, 6.283185307179586, 3.141592653589793, 0), aspect="auto")
        ax.set_xlabel("phi")
        ax.set_ylabel("theta")
        ax.set_title(scale)
    fig.savefig(stem + ".png", dpi=150)
"##
    )
}
