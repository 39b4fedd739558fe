"""
Vessels that follow free space
==============================

A scaffold that branches into a busy corner and a free one. The vascular
controller rewards the free side; after a few hundred steps nearly all of
the filaments from the trunk run into it.
"""

from florasim import VmcParams, VmcState, allocate_filaments, build_scaffold, vmc_step

# %%
# A trunk that forks once. Node 2 sits in the busy corner, node 3 in the open.
graph = build_scaffold(
    {
        "nodes": [
            {"id": 0, "pos": [0, 0, 0]},
            {"id": 1, "pos": [0, 0, 100]},
            {"id": 2, "pos": [-40, 0, 150]},
            {"id": 3, "pos": [40, 0, 150]},
        ],
        "segments": [
            {"id": 0, "from": 0, "to": 1, "filaments": 16},
            {"id": 1, "from": 1, "to": 2, "filaments": 8},
            {"id": 2, "from": 1, "to": 3, "filaments": 8},
        ],
        "root": 0,
    }
)

# leaf success: 1 minus how often the space is occupied
scores = {2: 0.2, 3: 1.0}
params = VmcParams()
state = VmcState.initial(graph, params)

# %%
# Step the controller and watch the split of the 16 trunk filaments.
for step in range(1, 301):
    state, proposals = vmc_step(graph, state, scores, params)
    if step in (1, 10, 50, 100, 300):
        busy, free = allocate_filaments(16, [state.vessel[2], state.vessel[3]], params)
        print(f"step {step:3d}: vessels busy={state.vessel[2]:.3f} free={state.vessel[3]:.3f} -> filaments {busy}/{free}")

print("structure proposals at the end:", [(p.kind, p.node_id) for p in proposals])
