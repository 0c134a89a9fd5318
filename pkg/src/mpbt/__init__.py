"""Energy-efficient broadcast trees for multi-hop wireless networks.

Cost-sharing games under best-response dynamics, classical heuristics,
exact optima and the Monte-Carlo harness that compares them.
"""
from .errors import MPBTError
from .game import CostScheme, GameTrace, best_response, is_nash_equilibrium, run_brd
from .netmodel import (
    ChannelParams,
    InstanceSampler,
    NetworkInstance,
    NodeParams,
    build_instance,
    channel_gain,
    from_power_matrix,
    generate_connected_instance,
    line_instance,
    network_power,
    node_power,
)
from .tree import BroadcastTree, initialize, validate

__version__ = "0.1.0"
