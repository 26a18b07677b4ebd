"""Quantum hacking fidelities of unitary networks.

Evaluators, optimizers and Haar-averaged asymptotics for the fidelity with
which a party holding one input/output port of a unitary network can pull
out another party's quantum data while planting a maximally entangled state
in its place.
"""

from qhack.linalg import (
    PartitionError,
    abs_left,
    complete_to_unitary,
    kron,
    partial_trace,
    pinv_on_support,
    polar_coisometry,
    rotate_clockwise,
    schatten_norm,
    svd,
)
from qhack.random import RngState, haar_unitary, random_density_and_pure, random_probe
from qhack.hacking import (
    HackingReport,
    MixedProbe,
    OptimizerSettings,
    RotatedChannel,
    UnitaryNetwork,
    check_tradeoff,
    hp_fidelity,
    hp_optimal,
    mixed_probe_fidelity,
    optimal_probe_for_recovery,
    optimal_recovery_for_probe,
    optimize_probe,
    p_hack_trace_form,
    p_me,
    pg_strategy,
    rotated,
    simulate_final_state,
)
from qhack.theory import DimensionProfile, avg_p_opt, hyp2f1_half, i_kappa, i_kappa_approx

__version__ = "0.1.0"
