"""
Two rings, one switch
=====================

The braiding machine fixture: two rings of four drivers and four switches,
bridged by one extra switch. Sixteen carriers start on the left ring, braid
a tube, then four of them cross over and the rings braid apart.

Afterwards a smaller machine shows what the crossing trace looks like when
two single-driver rings are spliced into a figure eight.
"""

from florasim.braid import (
    build_layout,
    compile_program,
    execute_schedule,
    twin_ring_layout_spec,
    figure_eight_layout_spec,
    parse_program,
    pos_str,
    trace_to_word,
    verify_schedule,
    write_schedule,
)

layout = build_layout(twin_ring_layout_spec())
for ring in layout.rings:
    print(f"ring {ring.id}: drivers {' '.join(ring.drivers)}, period {ring.period} ticks")
print("bridge between the rings:", layout.bridges_between([0], [1]))

# %%
# One carrier per position of ring 0, a tube, a 12/4 split, another tube.
loads = [{"op": "load", "carrier": f"c{i}", "position": pos_str(p), "filament": f"f{i}"} for i, p in enumerate(layout.ring(0).cycle)]
program = parse_program(
    {
        "phases": loads
        + [
            {"op": "tube", "rings": [0], "ticks": 40},
            {"op": "split", "group": [0], "into": [[0], [1]], "counts": [12, 4]},
            {"op": "tube", "rings": [0, 1], "ticks": 40},
        ]
    }
)
schedule = compile_program(program, layout)
print(verify_schedule(schedule, layout).to_text(), end="")

# the split is where carriers ride the bridge one at a time
for line in write_schedule(schedule).splitlines()[40:47]:
    print("  ", line[:110] + (" ..." if len(line) > 110 else ""))

# %%
# Figure eight: with the middle switch in transfer state the two rings form
# one circuit and carriers pass each other at the switch.
eight = build_layout(figure_eight_layout_spec())
loads = [{"op": "load", "carrier": f"c{i}", "position": pos_str(p), "filament": f"f{i}"} for i, p in enumerate(eight.positions)]
program = parse_program({"phases": loads + [{"op": "merge", "groups": [[0], [1]]}, {"op": "tube", "rings": [0, 1], "ticks": 16}]})
trace = execute_schedule(compile_program(program, eight), eight)
print(f"{len(trace.crossings)} crossings over 16 ticks")
print("braid word:", trace_to_word(trace))
