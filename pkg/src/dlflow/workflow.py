"""The lifecycle state machine: ordered steps across the data, model, and
deployment pipelines, role ownership per step, and the feedback edges that
start new iterations. Histories are append-only paths in this graph."""

from dataclasses import dataclass, field
from pathlib import Path

from ._util import append_record, read_records
from .errors import IllegalTransition, NotFound, PermissionDenied
from .project import ProjectConfig

START_STEP = "project-start"

# step id -> owning role ("any" only for the entry point)
STEP_OWNERS = {
    "project-start": "any",
    "define-requirements": "model-validator",
    "initial-setup": "devops-engineer",
    # data pipeline
    "data-collection": "data-engineer",
    "data-splitting": "data-engineer",
    "data-ingestion": "data-engineer",
    "data-versioning": "data-engineer",
    "data-cleaning": "data-engineer",
    "data-validation": "data-engineer",
    "data-labeling": "data-labeler",
    # model pipeline
    "create-experiment": "data-scientist",
    "data-analysis": "data-scientist",
    "data-preprocessing": "data-scientist",
    "validation-split": "data-scientist",
    "model-building": "data-scientist",
    "hp-optimization": "data-scientist",
    "training": "data-scientist",
    "experiment-evaluation": "data-scientist",
    "model-registration": "data-scientist",
    "model-evaluation": "data-scientist",
    "model-submission": "data-scientist",
    "review": "model-validator",
    # deployment pipeline
    "model-implementation": "software-engineer",
    "implementation-review": "model-validator",
    "model-compression": "data-scientist",
    "model-revision": "model-validator",
    "model-packaging": "devops-engineer",
    "model-deployment": "devops-engineer",
    "model-monitoring": "data-scientist",
    "model-maintenance": "data-scientist",
}

# forward edges plus the feedback loops; optional steps are skippable edges
STEP_EDGES = {
    "project-start": {"define-requirements"},
    "define-requirements": {"initial-setup"},
    "initial-setup": {"data-collection"},
    "data-collection": {"data-splitting", "data-ingestion"},
    "data-splitting": {"data-ingestion"},
    "data-ingestion": {"data-versioning", "training"},  # training = CI trigger
    "data-versioning": {"data-cleaning"},
    "data-cleaning": {"data-validation"},
    "data-validation": {"data-labeling", "data-collection"},  # insufficient-data loop
    "data-labeling": {"create-experiment"},
    "create-experiment": {"data-analysis"},
    "data-analysis": {"data-preprocessing"},
    "data-preprocessing": {"validation-split"},
    "validation-split": {"model-building"},
    "model-building": {"hp-optimization", "training"},  # hp step optional
    "hp-optimization": {"training"},
    "training": {"experiment-evaluation"},
    "experiment-evaluation": {"model-registration", "model-building"},
    "model-registration": {"model-evaluation"},
    "model-evaluation": {"model-submission", "model-building"},
    "model-submission": {"review"},
    # review feedback: back to modeling or to data collection
    "review": {"model-implementation", "model-packaging", "model-building", "data-collection"},
    "model-implementation": {"implementation-review"},
    "implementation-review": {"model-compression", "model-packaging"},
    "model-compression": {"model-revision"},
    "model-revision": {"model-packaging"},
    "model-packaging": {"model-deployment"},
    "model-deployment": {"model-monitoring"},
    "model-monitoring": {"model-maintenance"},
    # maintenance re-entry points, each starts a new iteration
    "model-maintenance": {"data-collection", "create-experiment", "model-deployment"},
}


def owning_role(step: str) -> str:
    if step not in STEP_OWNERS:
        raise NotFound(f"unknown step {step!r}")
    return STEP_OWNERS[step]


def is_edge(current: str, target: str) -> bool:
    return target in STEP_EDGES.get(current, set())


@dataclass
class WorkflowRun:
    project: str
    iteration: int = 1
    current_step: str = START_STEP
    history: list = field(default_factory=list)  # (step, actor, at, note)


class WorkflowEngine:
    def __init__(self, root: Path, project: ProjectConfig, clock):
        self.root = Path(root)
        self.project = project
        self.clock = clock

    def _path(self, project: str) -> Path:
        return self.root / "workflow" / f"{project}.jsonl"

    def get_run(self, project: str | None = None) -> WorkflowRun:
        project = project or self.project.project
        run = WorkflowRun(project=project)
        for rec in read_records(self._path(project)):
            run.history.append((rec["step"], rec["actor"], rec["at"], rec.get("note", "")))
            run.current_step = rec["step"]
            run.iteration = rec["iteration"]
        return run

    def start(self, actor: str, project: str | None = None, note: str = "") -> WorkflowRun:
        project = project or self.project.project
        self.project.role(actor)
        if self._path(project).exists():
            raise IllegalTransition(f"project {project!r} already started")
        append_record(
            self._path(project),
            {"step": START_STEP, "actor": actor, "at": self.clock.now(), "iteration": 1, "note": note},
        )
        return self.get_run(project)

    def advance(self, step: str, actor: str, project: str | None = None, note: str = "") -> WorkflowRun:
        project = project or self.project.project
        run = self.get_run(project)
        if not run.history:
            raise IllegalTransition("workflow not started; advance to project-start first")
        if not is_edge(run.current_step, step):
            raise IllegalTransition(f"{run.current_step} -> {step} is not a workflow edge")
        owner = owning_role(step)
        role = self.project.role(actor)
        if owner != "any" and role != owner:
            raise PermissionDenied(f"step {step!r} is owned by {owner}, not {role}")
        iteration = run.iteration
        if run.current_step == "model-maintenance":
            iteration += 1
        append_record(
            self._path(project),
            {"step": step, "actor": actor, "at": self.clock.now(), "iteration": iteration, "note": note},
        )
        return self.get_run(project)
