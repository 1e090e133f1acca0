"""Equity-aware transit network design on a road network, solved as a MILP."""

from equitransit.network import (
    Arc,
    DemandProfile,
    DesignProblem,
    Node,
    PriorityProfile,
    RoadNetwork,
    UtilityProfile,
    ValidationError,
    evaluate_utility_profile,
    utility,
    welfare_maxmin,
    welfare_tradeoff,
    welfare_utilitarian,
)

__version__ = "0.1.0"
