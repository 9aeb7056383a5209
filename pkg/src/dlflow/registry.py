"""Model registry: versioned model records with a role-gated stage lifecycle.

Stages move along registered -> submitted -> approved -> production, with
submitted -> rejected terminal. Versions are gapless per model name; state is
the fold of an append-only per-model event log, so stage history is never
rewritten. Promotion demotes any previous production version of the same
name and emits exactly one deployment trigger event.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ._util import append_record, flocked, read_records
from .errors import (
    GateFailed,
    InvalidConfig,
    MissingCheckpoint,
    MissingTestMetrics,
    NotFound,
    PermissionDenied,
    SelfReviewDenied,
    WrongStage,
)
from .project import ProjectConfig

STAGES = ("registered", "submitted", "approved", "production", "rejected")

ALLOWED_TRANSITIONS = {
    ("registered", "submitted"),
    ("submitted", "approved"),
    ("submitted", "rejected"),
    ("approved", "production"),
    ("production", "approved"),  # demotion when a successor goes live
}


@dataclass
class ModelVersion:
    model_name: str
    version: int
    checkpoint: str
    experiment: str
    source_snapshot: str
    creator: str
    created_at: int
    description: str = ""
    dependencies: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    stage: str = "registered"
    reviewer: str = ""
    decision: str = ""
    history: list = field(default_factory=list)  # (from, to, actor, at)


class ModelRegistry:
    def __init__(self, root: Path, project: ProjectConfig, experiments, clock):
        self.root = Path(root)
        self.project = project
        self.experiments = experiments
        self.clock = clock
        self._promotion_hooks: list[Callable[[ModelVersion], None]] = []

    def on_promotion(self, hook: Callable[[ModelVersion], None]) -> None:
        self._promotion_hooks.append(hook)

    # -- persistence --

    def _log_path(self, name: str) -> Path:
        return self.root / "registry" / f"{name}.jsonl"

    def _lock(self, name: str):
        return flocked(self.root / "locks" / f"registry-{name}.lock")

    def _fold(self, name: str) -> dict[int, ModelVersion]:
        versions: dict[int, ModelVersion] = {}
        for rec in read_records(self._log_path(name)):
            kind = rec["event"]
            if kind == "register":
                versions[rec["version"]] = ModelVersion(
                    model_name=name,
                    version=rec["version"],
                    checkpoint=rec["checkpoint"],
                    experiment=rec["experiment"],
                    source_snapshot=rec["source_snapshot"],
                    creator=rec["creator"],
                    created_at=rec["at"],
                    description=rec.get("description", ""),
                    dependencies=rec.get("dependencies", []),
                    metrics=dict(rec.get("metrics", {})),
                )
            elif kind == "metrics":
                versions[rec["version"]].metrics.update(rec["metrics"])
            elif kind == "transition":
                mv = versions[rec["version"]]
                mv.history.append((rec["from"], rec["to"], rec["actor"], rec["at"]))
                mv.stage = rec["to"]
                if rec["to"] in ("approved", "rejected") and rec["from"] == "submitted":
                    mv.reviewer = rec["actor"]
                    mv.decision = "approve" if rec["to"] == "approved" else "reject"
        return versions

    def list_models(self) -> list[str]:
        reg_dir = self.root / "registry"
        if not reg_dir.exists():
            return []
        return sorted(p.stem for p in reg_dir.glob("*.jsonl") if not p.stem.startswith("_"))

    def get_model(self, name: str) -> list[ModelVersion]:
        if not self._log_path(name).exists():
            raise NotFound(f"model {name!r} not found")
        return [mv for _v, mv in sorted(self._fold(name).items())]

    def get_version(self, name: str, version: int) -> ModelVersion:
        versions = self._fold(name)
        if version not in versions:
            raise NotFound(f"model {name!r} has no version {version}")
        return versions[version]

    def production_version(self, name: str) -> Optional[ModelVersion]:
        if not self._log_path(name).exists():
            return None
        for mv in self._fold(name).values():
            if mv.stage == "production":
                return mv
        return None

    # -- operations --

    def register_model(
        self,
        name: str,
        checkpoint: str,
        experiment: str,
        source_snapshot: str,
        creator: str,
        description: str = "",
        dependencies: Optional[list] = None,
    ) -> ModelVersion:
        if self.project.role(creator) != "data-scientist":
            raise PermissionDenied(f"{creator} is not a data-scientist")
        try:
            _exp_id, ckpt = self.experiments.get_checkpoint(checkpoint)
        except NotFound as exc:
            raise MissingCheckpoint(str(exc)) from exc
        with self._lock(name):
            versions = self._fold(name)
            version = max(versions, default=0) + 1
            append_record(
                self._log_path(name),
                {
                    "event": "register",
                    "version": version,
                    "checkpoint": checkpoint,
                    "experiment": experiment,
                    "source_snapshot": source_snapshot,
                    "creator": creator,
                    "description": description,
                    "dependencies": dependencies or [],
                    "metrics": dict(ckpt.metrics_snapshot),
                    "at": self.clock.now(),
                },
            )
        return self.get_version(name, version)

    def attach_test_metrics(self, name: str, version: int, metrics: dict) -> ModelVersion:
        for key in metrics:
            if not key.startswith("test_"):
                raise InvalidConfig(f"test metric {key!r} must be prefixed test_")
        with self._lock(name):
            mv = self.get_version(name, version)
            if mv.stage != "registered":
                raise WrongStage(f"metrics attach only in registered stage, not {mv.stage}")
            append_record(
                self._log_path(name),
                {"event": "metrics", "version": version, "metrics": dict(metrics)},
            )
        return self.get_version(name, version)

    def _transition(self, name: str, version: int, to_stage: str, actor: str) -> None:
        mv = self.get_version(name, version)
        if (mv.stage, to_stage) not in ALLOWED_TRANSITIONS:
            raise WrongStage(f"{mv.stage} -> {to_stage} is not an allowed transition")
        append_record(
            self._log_path(name),
            {
                "event": "transition",
                "version": version,
                "from": mv.stage,
                "to": to_stage,
                "actor": actor,
                "at": self.clock.now(),
            },
        )

    def submit(self, name: str, version: int, actor: str) -> ModelVersion:
        self.project.role(actor)
        with self._lock(name):
            mv = self.get_version(name, version)
            if mv.stage != "registered":
                raise WrongStage(f"submit requires registered stage, not {mv.stage}")
            gate = self.project.gate_for(name)
            metric, threshold = gate["metric"], float(gate["threshold"])
            test_metrics = {k: v for k, v in mv.metrics.items() if k.startswith("test_")}
            if not test_metrics:
                raise MissingTestMetrics(f"{name} v{version} has no test metrics")
            if metric not in mv.metrics:
                raise MissingTestMetrics(f"{name} v{version} missing gate metric {metric!r}")
            value = float(mv.metrics[metric])
            if value < threshold:
                raise GateFailed(f"{metric}={value} below threshold {threshold}")
            self._transition(name, version, "submitted", actor)
        return self.get_version(name, version)

    def review(self, name: str, version: int, decision: str, reviewer: str) -> ModelVersion:
        if decision not in ("approve", "reject"):
            raise InvalidConfig(f"decision must be approve or reject, got {decision!r}")
        if self.project.role(reviewer) != "model-validator":
            raise PermissionDenied(f"{reviewer} is not a model-validator")
        with self._lock(name):
            mv = self.get_version(name, version)
            if mv.stage != "submitted":
                raise WrongStage(f"review requires submitted stage, not {mv.stage}")
            if reviewer == mv.creator:
                raise SelfReviewDenied(f"{reviewer} cannot review their own model")
            to_stage = "approved" if decision == "approve" else "rejected"
            self._transition(name, version, to_stage, reviewer)
        return self.get_version(name, version)

    def promote_to_production(self, name: str, version: int, actor: str) -> ModelVersion:
        if self.project.role(actor) not in ("devops-engineer", "model-validator"):
            raise PermissionDenied(f"{actor} may not promote models")
        with self._lock(name):
            mv = self.get_version(name, version)
            if mv.stage != "approved":
                raise WrongStage(f"promotion requires approved stage, not {mv.stage}")
            previous = self.production_version(name)
            if previous is not None:
                self._transition(name, previous.version, "approved", actor)
            self._transition(name, version, "production", actor)
            append_record(
                self.root / "registry" / "_deploy-triggers.jsonl",
                {"model": name, "version": version, "actor": actor, "at": self.clock.now()},
            )
        promoted = self.get_version(name, version)
        for hook in self._promotion_hooks:
            hook(promoted)
        return promoted

    def deployment_triggers(self) -> list[dict]:
        return read_records(self.root / "registry" / "_deploy-triggers.jsonl")
