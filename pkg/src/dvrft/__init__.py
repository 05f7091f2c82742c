"""Data-driven synthesis of distributed controllers for interconnected discrete-time systems."""

from .lti import RationalTF, StateSpace, filter_signal, inverse_filter, realize, tf
from .network import (
    Graph,
    NetworkSpec,
    ReferenceNodeSpec,
    SubsystemSpec,
    load_spec,
    normalize_interconnection,
    save_spec,
    simulate_plant,
    simulate_reference,
    validate_network,
)
from .controller import DistributedController, NodeController, zero_controller
from .ideal import (
    build_ideal_controller,
    build_ideal_node,
    check_realizability,
    map_to_parameters,
    to_distributed_controller,
)
from .virtual import (
    VirtualData,
    virtual_controller_interconnections,
    virtual_references_centralized,
    virtual_references_distributed,
)
from .identification import (
    ControllerParametrization,
    IdentificationResult,
    NodeParametrization,
    check_minimum_equivalence,
    controller_class,
    excitation_check,
    identify_all,
    identify_node,
)
from .evaluation import (
    assemble_closed_loop,
    estimate_jmr,
    monte_carlo,
    performance_metric,
    simulate_closed_loop,
    synthesize_controller,
)
from .config import ControllerClassSpec, ExperimentConfig
from .estimator import DistributedVRFT

__version__ = "0.1.0"

__all__ = [
    "RationalTF",
    "StateSpace",
    "tf",
    "filter_signal",
    "inverse_filter",
    "realize",
    "Graph",
    "SubsystemSpec",
    "ReferenceNodeSpec",
    "NetworkSpec",
    "load_spec",
    "save_spec",
    "validate_network",
    "simulate_plant",
    "simulate_reference",
    "normalize_interconnection",
    "DistributedController",
    "NodeController",
    "zero_controller",
    "build_ideal_node",
    "build_ideal_controller",
    "to_distributed_controller",
    "check_realizability",
    "map_to_parameters",
    "VirtualData",
    "virtual_references_distributed",
    "virtual_references_centralized",
    "virtual_controller_interconnections",
    "NodeParametrization",
    "ControllerParametrization",
    "controller_class",
    "identify_node",
    "identify_all",
    "excitation_check",
    "check_minimum_equivalence",
    "IdentificationResult",
    "assemble_closed_loop",
    "simulate_closed_loop",
    "estimate_jmr",
    "performance_metric",
    "synthesize_controller",
    "monte_carlo",
    "ControllerClassSpec",
    "ExperimentConfig",
    "DistributedVRFT",
    "__version__",
]
