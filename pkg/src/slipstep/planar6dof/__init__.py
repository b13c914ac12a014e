"""Full-body planar validation model."""

from .model import BipedModel, load_model
from .planner import QuinticPlan, plan_step
from .scenario import FeasibilityReport, FullScenario, run_full_scenario

__all__ = ["BipedModel", "load_model", "QuinticPlan", "plan_step",
           "FeasibilityReport", "FullScenario", "run_full_scenario"]
