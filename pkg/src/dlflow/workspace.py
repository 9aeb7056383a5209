"""One object wiring every subsystem over a single root directory.

The root comes from the DLFLOW_ROOT environment variable (default
`.dlflow/`). In deterministic mode timestamps come from a persisted logical
clock, making whole runs reproducible from a clean root.
"""

import os
from pathlib import Path

from ._util import LogicalClock, WallClock
from .experiment import ExperimentTracker
from .labels import LabelStore
from .pipeline import PipelineEngine
from .project import ProjectConfig
from .registry import ModelRegistry
from .serving import ServingGateway
from .store import DataStore, ObjectStore
from .workflow import WorkflowEngine

DEFAULT_ROOT = ".dlflow"


class Workspace:
    def __init__(self, root: str | Path | None = None, deterministic: bool | None = None):
        if root is None:
            root = os.environ.get("DLFLOW_ROOT", DEFAULT_ROOT)
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.project = ProjectConfig(self.root)
        if deterministic is None:
            env = os.environ.get("DLFLOW_DETERMINISTIC")
            deterministic = env == "1" if env is not None else self.project.deterministic
        self.deterministic = bool(deterministic)
        self.clock = LogicalClock(self.root) if self.deterministic else WallClock()
        self.objects = ObjectStore(self.root / "objects")
        self.data = DataStore(self.root, self.objects, self.clock)
        self.pipelines = PipelineEngine(self.root, self.data)
        self.labels = LabelStore(self.root, self.data, self.clock)
        self.experiments = ExperimentTracker(self.root, self.data, self.labels, self.clock)
        self.models = ModelRegistry(self.root, self.project, self.experiments, self.clock)
        self.serving = ServingGateway(self.root, self.models, self.experiments, self.clock)
        self.workflow = WorkflowEngine(self.root, self.project, self.clock)

    @staticmethod
    def init(
        root: str | Path | None = None,
        deterministic: bool = False,
        project: str = "default",
    ) -> "Workspace":
        """Create the root with a starter project config."""
        ws = Workspace(root, deterministic=deterministic)
        ws.project.project = project
        ws.project.deterministic = deterministic
        ws.project.save()
        return ws

    def is_clean(self) -> bool:
        if not self.root.exists():
            return True
        reserved = {"project.json", "clock", "locks"}
        return not any(p.name not in reserved for p in self.root.iterdir())
