"""Dynamic vehicle routing with time slices, Kruskal clustering, Monte Carlo requests and PSO."""
from .model import (Instance, Request, Route, Solution, check_feasibility, distance, distance_matrix,
                    route_length, total_cost)
from .instance_io import CutoffConfig, InstanceParseError, apply_cutoff, load_instance, parse_instance
from .pso import PsoParams
from .simulator import StrategyConfig, default_config, run_day

__all__ = ["Instance", "Request", "Route", "Solution", "check_feasibility", "distance", "distance_matrix",
           "route_length", "total_cost", "CutoffConfig", "InstanceParseError", "apply_cutoff", "load_instance",
           "parse_instance", "PsoParams", "StrategyConfig", "default_config", "run_day"]
__version__ = "0.1.0"
