"""
The windowed wall
=================

Four plant columns climb a scaffold wall with a window in it. A repeller
inside the window shines far-red whenever a tip heads for the glass, and a
chain of attractors pulls growth up the column beside it. At tick 250 a
patch of plant on the right column is cut away and has to grow back.

Writes ``windowed-wall-final.svg`` to the current directory.
"""

from pathlib import Path

from florasim import render_svg, run
from florasim.scenarios import benchmark_config

config = benchmark_config(seed=0)
log, metrics, world = run(config)
result = metrics.result

# %%
# Coverage of each region at a few moments.
for tick in (100, 249, 250, 300, 399):
    cov = log.records[tick]["coverage"]
    print(f"tick {tick:3d}: " + ", ".join(f"{k} {v:.2f}" for k, v in sorted(cov.items())))

print(f"window violations: {result.window_violations}")
print(f"wound coverage before the cut: {result.pre_damage['wound']:.2f}, repaired at tick {result.repair_tick}")
print("benchmark", "passed" if result.passed else "failed")

# %%
# Snapshot of the final state.
Path("windowed-wall-final.svg").write_text(render_svg(world, config.regions), encoding="utf-8")
