from .bundle import run
from .scenario import Scenario, ScenarioError
from .verify import verify

__all__ = ["run", "verify", "Scenario", "ScenarioError"]
