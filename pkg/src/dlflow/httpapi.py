"""HTTP surface: model registry endpoints, the inference and scoring routes,
and an /api/v1 orchestrator mirroring the CLI verbs."""

import base64
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import (
    DlflowError,
    GateFailed,
    IllegalTransition,
    InvalidConfig,
    MalformedPayload,
    MissingTestMetrics,
    NotFound,
    PermissionDenied,
    SelfReviewDenied,
    WrongStage,
)
from .experiment import ExperimentConfig
from .pipeline import PipelineSpec
from .usecases import run_use_case, trace
from .workspace import Workspace

_STATUS = {
    NotFound: 404,
    PermissionDenied: 403,
    SelfReviewDenied: 403,
    WrongStage: 409,
    GateFailed: 409,
    MissingTestMetrics: 409,
    IllegalTransition: 409,
    MalformedPayload: 400,
    InvalidConfig: 400,
}


class RegisterBody(BaseModel):
    checkpoint: str
    experiment: str
    source_snapshot: str
    creator: str
    description: str = ""


class ActorBody(BaseModel):
    actor: str


class ReviewBody(BaseModel):
    decision: str
    reviewer: str


class MetricsBody(BaseModel):
    metrics: dict


class CommitBody(BaseModel):
    branch: str = "master"
    author: str = "api"
    message: str
    files_text: dict[str, str] = {}
    files_b64: dict[str, str] = {}


class StepBody(BaseModel):
    step: str
    actor: str
    project: Optional[str] = None
    note: str = ""


class UseCaseBody(BaseModel):
    which: str
    workdir: str


def _version_view(mv) -> dict:
    return {
        "model": mv.model_name,
        "version": mv.version,
        "stage": mv.stage,
        "checkpoint": mv.checkpoint,
        "experiment": mv.experiment,
        "source_snapshot": mv.source_snapshot,
        "creator": mv.creator,
        "metrics": mv.metrics,
        "history": mv.history,
    }


def create_app(root=None) -> FastAPI:
    ws = Workspace(root)
    app = FastAPI(title="dlflow", version="0.1.0")

    @app.exception_handler(DlflowError)
    async def _dlflow_error(_request: Request, exc: DlflowError):
        status = 400
        for klass, code in _STATUS.items():
            if isinstance(exc, klass):
                status = code
                break
        return JSONResponse(status_code=status, content={"error": exc.code, "detail": str(exc)})

    # -- model registry --

    @app.post("/models/{name}/versions")
    def register_model(name: str, body: RegisterBody):
        mv = ws.models.register_model(
            name, body.checkpoint, body.experiment, body.source_snapshot,
            body.creator, description=body.description,
        )
        return _version_view(mv)

    @app.post("/models/{name}/versions/{version}/metrics")
    def attach_metrics(name: str, version: int, body: MetricsBody):
        return _version_view(ws.models.attach_test_metrics(name, version, body.metrics))

    @app.post("/models/{name}/versions/{version}/submit")
    def submit(name: str, version: int, body: ActorBody):
        return _version_view(ws.models.submit(name, version, body.actor))

    @app.post("/models/{name}/versions/{version}/review")
    def review(name: str, version: int, body: ReviewBody):
        return _version_view(ws.models.review(name, version, body.decision, body.reviewer))

    @app.post("/models/{name}/versions/{version}/promote")
    def promote(name: str, version: int, body: ActorBody):
        return _version_view(ws.models.promote_to_production(name, version, body.actor))

    @app.get("/models/{name}")
    def get_model(name: str):
        return [_version_view(mv) for mv in ws.models.get_model(name)]

    # -- serving --

    @app.post("/predict/{deployment}")
    def predict(deployment: str, payload: dict):
        return ws.serving.predict(deployment, payload)

    @app.get("/deployments")
    def deployments():
        return [
            {
                "deployment": d.deployment_name,
                "model": d.model_name,
                "version": d.version,
                "endpoint": d.endpoint,
                "status": d.status,
            }
            for d in ws.serving.list_deployments()
        ]

    @app.get("/scoring/{deployment}")
    def scoring(deployment: str, since: Optional[int] = None):
        return ws.serving.scoring_records(deployment, since=since)

    # -- orchestrator: /api/v1 mirrors the CLI verbs --

    @app.get("/api/v1/repos")
    def repos():
        return [
            {"name": name, "branches": ws.data.branches(name)}
            for name in ws.data.list_repos()
        ]

    @app.post("/api/v1/repos/{name}")
    def create_repo(name: str):
        return ws.data.create_repo(name)

    @app.post("/api/v1/repos/{name}/commits")
    def commit(name: str, body: CommitBody):
        files = {path: text.encode("utf-8") for path, text in body.files_text.items()}
        for path, blob in body.files_b64.items():
            files[path] = base64.b64decode(blob)
        result = ws.data.commit_files(name, body.branch, files, body.author, body.message)
        return {"commit": result.id, "tree": result.tree}

    @app.get("/api/v1/repos/{name}/diff/{commit_a}/{commit_b}")
    def diff(name: str, commit_a: str, commit_b: str):
        return [{"path": p, "change": c} for p, c in sorted(ws.data.diff(name, commit_a, commit_b))]

    @app.post("/api/v1/pipelines")
    def register_pipeline(doc: dict):
        spec = PipelineSpec.from_dict(doc)
        return {"name": spec.name, "spec_hash": ws.pipelines.register(spec)}

    @app.post("/api/v1/pipelines/{name}/runs")
    def run_pipeline(name: str):
        job = ws.pipelines.run_job(name)
        return {
            "job": job.id,
            "status": job.status,
            "output_commit": job.output_commit,
            "log": job.log,
        }

    @app.get("/api/v1/lineage/{repo}/{ref}")
    def lineage(repo: str, ref: str):
        commit_id = ws.data.resolve_ref(repo, ref).id
        return ws.pipelines.get_lineage(commit_id)

    @app.get("/api/v1/labels")
    def labels(split: str, repo: str, ref: str):
        return [
            {"path": p, "label": l}
            for p, l in ws.labels.query_labels(split, repo, ref)
        ]

    @app.post("/api/v1/experiments")
    def run_experiment(doc: dict):
        config = ExperimentConfig.from_dict(doc)
        return {"experiment": ws.experiments.run_experiment(config)}

    @app.get("/api/v1/experiments")
    def experiments():
        return ws.experiments.list_experiments()

    @app.get("/api/v1/experiments/{experiment_id}/best")
    def best(experiment_id: str, metric: str = "validation_accuracy", direction: str = "max"):
        ckpt = ws.experiments.best_checkpoint(experiment_id, metric, direction)
        return {
            "checkpoint": ckpt.id,
            "trial_id": ckpt.trial_id,
            "step": ckpt.step,
            "metrics": ckpt.metrics_snapshot,
        }

    @app.post("/api/v1/workflow/step")
    def workflow_step(body: StepBody):
        if body.step == "project-start":
            run = ws.workflow.start(body.actor, project=body.project, note=body.note)
        else:
            run = ws.workflow.advance(body.step, body.actor, project=body.project, note=body.note)
        return {"project": run.project, "current_step": run.current_step, "iteration": run.iteration}

    @app.get("/api/v1/workflow")
    def workflow_state(project: Optional[str] = None):
        run = ws.workflow.get_run(project)
        return {
            "project": run.project,
            "current_step": run.current_step,
            "iteration": run.iteration,
            "history": run.history,
        }

    @app.get("/api/v1/trace/{model}/{version}")
    def trace_model(model: str, version: int):
        return trace(ws, model, version)

    @app.post("/api/v1/usecase")
    def usecase(body: UseCaseBody):
        return run_use_case(body.which, body.workdir)

    return app
