"""Generated matplotlib scripts that render figures from the CSV outputs.

Nothing here imports matplotlib; the emitted scripts do, when run.  Moving
average smoothing happens only inside those scripts.
"""
from __future__ import annotations

from pathlib import Path

_HEADER = '''"""Generated plot script; run with: python {name}"""
import csv
import sys
from collections import defaultdict
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
SMOOTHING = {smoothing}


def rows(name):
    with open(HERE / name, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def smooth(values, window=SMOOTHING):
    if window <= 1:
        return values
    out = []
    for i in range(len(values)):
        chunk = [v for v in values[max(0, i - window + 1): i + 1] if v == v]
        out.append(sum(chunk) / len(chunk) if chunk else float("nan"))
    return out

'''

_CHAIN = '''
series = defaultdict(lambda: defaultdict(list))
for r in rows("aggregate.csv"):
    for tag in ("neg", "pos", "all"):
        series[tag][r["algorithm"]].append(float(r["rate_" + tag]))

fig, axes = plt.subplots(1, 3, figsize=(15, 4), sharey=True)
titles = {"neg": "chains with mean < 0", "pos": "chains with mean > 0", "all": "all chains"}
for ax, tag in zip(axes, ("neg", "pos", "all")):
    for label, ys in series[tag].items():
        ax.plot(smooth(ys), label=label)
    ax.set_title(titles[tag])
    ax.set_xlabel("episode")
axes[0].set_ylabel("correct-action rate at A")
axes[-1].legend()
fig.tight_layout()
fig.savefig(HERE / "correct_action_rate.png", dpi=120)
'''

_BIAS = '''
series = defaultdict(list)
for r in rows("bias.csv"):
    series[r["algorithm"]].append(float(r["bias_mean"]))

fig, ax = plt.subplots(figsize=(6, 4))
for label, ys in series.items():
    ax.plot(smooth(ys), label=label)
ax.axhline(0.0, color="black", lw=0.8)
ax.set_xlabel("episode")
ax.set_ylabel("bias of optimal action at A")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "bias_trace.png", dpi=120)
'''

_MSE = '''
curves = defaultdict(list)
for r in rows("mse_curve.csv"):
    curves[float(r["delta"])].append((float(r["ratio"]), float(r["mse"])))
stars = [(float(r["delta"]), float(r["ratio_star"])) for r in rows("mse_minimizers.csv")]

fig, ax = plt.subplots(figsize=(6, 4))
for delta, pts in sorted(curves.items()):
    xs, ys = zip(*pts)
    line, = ax.plot(xs, ys, label=f"gap={{delta:g}}")
    best = min(pts, key=lambda p: p[1])
    ax.plot(*best, "*", color=line.get_color(), ms=10)
ax.set_yscale("log")
ax.set_xlabel("index samples / N")
ax.set_ylabel("MSE")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig(HERE / "mse_curve.png", dpi=120)
'''

_SWEEP = '''
series = defaultdict(list)
for r in rows("split_sweep.csv"):
    series[int(r["m"])].append((float(r["normalized_gap"]), float(r["ratio_star"])))

fig, ax = plt.subplots(figsize=(6, 4))
for m, pts in sorted(series.items()):
    xs, ys = zip(*sorted(pts))
    ax.plot(xs, ys, marker=".", label=f"m={{m}}")
ax.set_xscale("log")
ax.set_xlabel("gap / (sigma sqrt(m))")
ax.set_ylabel("optimal index samples / N")
ax.legend()
fig.tight_layout()
fig.savefig(HERE / "split_sweep.png", dpi=120)
'''


def _write(path, body, smoothing=1) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = _HEADER.format(name=path.name, smoothing=int(smoothing)) + body.replace("{{", "{").replace("}}", "}")
    path.write_text(text, encoding="utf-8")
    return path


def write_chain_script(path, smoothing=1) -> Path:
    return _write(path, _CHAIN, smoothing)


def write_bias_script(path, smoothing=1) -> Path:
    return _write(path, _BIAS, smoothing)


def write_mse_curve_script(path) -> Path:
    return _write(path, _MSE)


def write_split_sweep_script(path) -> Path:
    return _write(path, _SWEEP)
