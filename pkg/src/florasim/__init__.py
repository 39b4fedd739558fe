"""Simulation toolkit for plant-robot biohybrid scaffolds.

Braided scaffold graphs grown by a vascular morphogenesis controller, a
modular braiding machine with a collision verifier, climbing plant tips
steered by light, immobile robotic nodes and a deterministic tick engine.
"""

from .braid import (
    BraidProgram,
    BraidTrace,
    CarrierSchedule,
    MachineLayout,
    VerificationReport,
    build_layout,
    compile_program,
    execute_schedule,
    parse_program,
    read_schedule,
    trace_to_word,
    verify_schedule,
    write_schedule,
)
from .config import ScenarioConfig, parse_config, serialize_config
from .engine import WorldState, evaluate_benchmark, initial_world, run, step
from .errors import FlorasimError
from .node import NodeParams, RoboticNode, detect, filtered_reading, policy_step, raw_ir_sample, sense_neighbors
from .plant import PlantBody, PlantParams, PlantTip, choose_branch, elongation_rate, grow_step, region_coverage
from .render import render_svg
from .runlog import read_log, write_log
from .vmc import VmcParams, VmcState, allocate_filaments, distribute_resource, propagate_success, update_vessels, vmc_step
from .world import Region, ScaffoldGraph, StimulusField, build_scaffold, nearest_segment, sample_stimulus

__version__ = "0.1.0"

__all__ = [
    "BraidProgram", "BraidTrace", "CarrierSchedule", "FlorasimError", "MachineLayout", "NodeParams", "PlantBody",
    "PlantParams", "PlantTip", "Region", "RoboticNode", "ScaffoldGraph", "ScenarioConfig", "StimulusField",
    "VerificationReport", "VmcParams", "VmcState", "WorldState", "allocate_filaments", "build_layout", "build_scaffold",
    "choose_branch", "compile_program", "detect", "distribute_resource", "elongation_rate", "evaluate_benchmark",
    "execute_schedule", "filtered_reading", "grow_step", "initial_world", "nearest_segment", "parse_config",
    "parse_program", "policy_step", "propagate_success", "raw_ir_sample", "read_log", "read_schedule",
    "region_coverage", "render_svg", "run", "sample_stimulus", "sense_neighbors", "serialize_config", "step",
    "trace_to_word", "update_vessels", "verify_schedule", "vmc_step", "write_log", "write_schedule",
]
