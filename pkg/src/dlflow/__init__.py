"""dlflow: a desk-scale deep-learning lifecycle orchestrator.

Versioned data with lineage, pipelines, experiment tracking with
successive-halving search, a role-gated model registry, and a serving
gateway with scoring capture — all over one content-addressed root.
"""

from . import learners  # registers the built-in entry points
from .contract import DataSource, TrialContract, get_learner, register_learner
from .errors import DlflowError
from .experiment import ExperimentConfig, ExperimentTracker, asha_decide
from .labels import LabelStore
from .pipeline import PipelineEngine, PipelineSpec
from .project import ProjectConfig
from .registry import ModelRegistry
from .serving import ServingGateway
from .store import DataStore, ObjectStore
from .usecases import evaluate_checkpoint, run_use_case, trace
from .workflow import WorkflowEngine
from .workspace import Workspace

__version__ = "0.1.0"

__all__ = [
    "Workspace",
    "DataStore",
    "ObjectStore",
    "PipelineEngine",
    "PipelineSpec",
    "LabelStore",
    "ExperimentTracker",
    "ExperimentConfig",
    "asha_decide",
    "ModelRegistry",
    "ServingGateway",
    "WorkflowEngine",
    "ProjectConfig",
    "TrialContract",
    "DataSource",
    "register_learner",
    "get_learner",
    "run_use_case",
    "trace",
    "evaluate_checkpoint",
    "DlflowError",
    "learners",
    "__version__",
]
