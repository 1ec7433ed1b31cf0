from .simulation import RunConfig, Simulation, run_convergence, run_single

__all__ = ["RunConfig", "Simulation", "run_convergence", "run_single"]
