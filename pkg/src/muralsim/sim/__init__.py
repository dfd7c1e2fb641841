from muralsim.sim.config import Scenario, parse_scenario, write_scenario
from muralsim.sim.runner import SimReport, Simulation, run_scenario

__all__ = ["Scenario", "parse_scenario", "write_scenario",
           "SimReport", "Simulation", "run_scenario"]
