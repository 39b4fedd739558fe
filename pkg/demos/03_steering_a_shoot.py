"""
Steering a shoot at a fork
==========================

A Y-shaped scaffold with one robotic node halfway up the right branch. The
node sits on the path to the target region, so it acts as an attractor:
as soon as its IR sensor picks up the approaching tip it lights blue, and
the shoot takes the lit branch at the fork.

Without the node both branches look the same and the tie goes to the
lower segment id, which is the left one.
"""

from florasim.config import config_from_dict
from florasim.engine import run
from florasim.scenarios import approach_run, steering_config

# %%
# First, how far away does a node notice a tip? Walk a tip straight at it.
first, _ = approach_run(seed=0)
print(f"first detection at {first:.1f} cm")

# %%
# The steering run.
config = steering_config(seed=0)
log, metrics, world = run(config)
lit = next(r["tick"] for r in log.records if r["leds"]["n1"][0] > 0)
print(f"node n1 ({world.nodes['n1'].role}) lights blue at tick {lit}")
print("tip ends on segment", log.records[-1]["tips"][0][1], "(right branch is 2)")

# %%
# Control: the same scaffold with no node.
control = config_from_dict({**config.to_dict(), "nodes": []})
log, _, _ = run(control)
print("without the node the tip ends on segment", log.records[-1]["tips"][0][1])
