"""The dlflow command line: repos and commits, pipelines and lineage,
labels, experiments, the model registry, serving, and the workflow steps."""

import json
import sys
from pathlib import Path

import click
import yaml

from .errors import DlflowError
from .experiment import ExperimentConfig
from .pipeline import PipelineSpec
from .usecases import run_use_case
from .usecases import trace as trace_model
from .workspace import Workspace


def _echo(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True, default=str))


def _load_doc(path: str) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    return yaml.safe_load(text)


def _split_ref(spec: str, default_branch: str = "master") -> tuple[str, str]:
    if "@" in spec:
        repo, ref = spec.split("@", 1)
        return repo, ref
    return spec, default_branch


class _Root(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except DlflowError as exc:
            click.echo(f"error: {exc.code}: {exc}", err=True)
            sys.exit(1)


@click.group(cls=_Root)
@click.option("--root", envvar="DLFLOW_ROOT", default=None, help="workspace root directory")
@click.pass_context
def main(ctx, root):
    ctx.ensure_object(dict)
    ctx.obj["root"] = root


def _ws(ctx) -> Workspace:
    return Workspace(ctx.obj.get("root"))


@main.command()
@click.option("--deterministic", is_flag=True, default=False)
@click.option("--project", default="default")
@click.pass_context
def init(ctx, deterministic, project):
    """Create the workspace root with a starter project config."""
    ws = Workspace.init(ctx.obj.get("root"), deterministic=deterministic, project=project)
    _echo({"root": str(ws.root), "project": ws.project.project, "deterministic": ws.deterministic})


# -- data store --


@main.group()
def repo():
    """Versioned data repositories."""


@repo.command("create")
@click.argument("name")
@click.pass_context
def repo_create(ctx, name):
    ws = _ws(ctx)
    _echo(ws.data.create_repo(name))


@repo.command("list")
@click.pass_context
def repo_list(ctx):
    ws = _ws(ctx)
    out = []
    for name in ws.data.list_repos():
        out.append({"name": name, "branches": ws.data.branches(name)})
    _echo(out)


@main.command()
@click.argument("target")  # <repo>@<branch>
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("-m", "--message", required=True)
@click.option("--as", "actor", default="ada")
@click.pass_context
def commit(ctx, target, directory, message, actor):
    """Commit a directory tree: dlflow commit <repo>@<branch> <dir> -m msg."""
    ws = _ws(ctx)
    repo_name, branch = _split_ref(target)
    base = Path(directory)
    files = {
        str(p.relative_to(base)).replace("\\", "/"): p.read_bytes()
        for p in sorted(base.rglob("*"))
        if p.is_file()
    }
    result = ws.data.commit_files(repo_name, branch, files, author=actor, message=message)
    _echo({"commit": result.id, "files": len(files), "tree": result.tree})


@main.command()
@click.argument("target")  # <repo>@<ref>:<path>
@click.pass_context
def read(ctx, target):
    """Print file bytes: dlflow read <repo>@<ref>:<path>."""
    ws = _ws(ctx)
    location, _, path = target.partition(":")
    repo_name, ref = _split_ref(location)
    sys.stdout.buffer.write(ws.data.read_file(repo_name, ref, path))


@main.command()
@click.argument("repo_name")
@click.argument("commit_a")
@click.argument("commit_b")
@click.pass_context
def diff(ctx, repo_name, commit_a, commit_b):
    ws = _ws(ctx)
    changes = sorted(ws.data.diff(repo_name, commit_a, commit_b))
    _echo([{"path": p, "change": c} for p, c in changes])


# -- pipelines --


@main.group()
def pipeline():
    """Versioned transforms with provenance."""


@pipeline.command("register")
@click.argument("spec_file", type=click.Path(exists=True))
@click.pass_context
def pipeline_register(ctx, spec_file):
    ws = _ws(ctx)
    spec = PipelineSpec.from_dict(_load_doc(spec_file))
    spec_hash = ws.pipelines.register(spec)
    _echo({"name": spec.name, "spec_hash": spec_hash})


@pipeline.command("run")
@click.argument("name")
@click.pass_context
def pipeline_run(ctx, name):
    ws = _ws(ctx)
    job = ws.pipelines.run_job(name)
    _echo(
        {
            "job": job.id,
            "status": job.status,
            "output_commit": job.output_commit,
            "log": job.log,
        }
    )


@main.command()
@click.argument("target")  # <repo>@<commit>
@click.pass_context
def lineage(ctx, target):
    ws = _ws(ctx)
    repo_name, ref = _split_ref(target)
    commit_id = ws.data.resolve_ref(repo_name, ref).id
    _echo(ws.pipelines.get_lineage(commit_id))


# -- labels --


@main.group()
def labels():
    """Ground-truth labels pinned to commits."""


@labels.command("import")
@click.argument("label_file_path")
@click.option("--split", type=click.Choice(["train", "test"]), required=True)
@click.option("--repo", "repo_name", required=True)
@click.option("--ref", required=True)
@click.pass_context
def labels_import(ctx, label_file_path, split, repo_name, ref):
    ws = _ws(ctx)
    count = ws.labels.import_labels(repo_name, ref, label_file_path, split)
    _echo({"imported": count})


@labels.command("auto")
@click.option("--split", type=click.Choice(["train", "test"]), required=True)
@click.option("--repo", "repo_name", required=True)
@click.option("--ref", required=True)
@click.option("--under", default="", help="path prefix holding <category>/<file> entries")
@click.option("--as", "actor", default="lou")
@click.pass_context
def labels_auto(ctx, split, repo_name, ref, under, actor):
    ws = _ws(ctx)
    count = ws.labels.auto_label(repo_name, ref, split, labeler=actor, under=under)
    _echo({"labeled": count})


@labels.command("query")
@click.option("--split", type=click.Choice(["train", "test"]), required=True)
@click.option("--repo", "repo_name", required=True)
@click.option("--ref", required=True)
@click.pass_context
def labels_query(ctx, split, repo_name, ref):
    ws = _ws(ctx)
    _echo([{"path": p, "label": l} for p, l in ws.labels.query_labels(split, repo_name, ref)])


# -- experiments --


@main.group()
def exp():
    """Experiment tracking and hyperparameter search."""


@exp.command("run")
@click.argument("config_file", type=click.Path(exists=True))
@click.pass_context
def exp_run(ctx, config_file):
    ws = _ws(ctx)
    config = ExperimentConfig.from_dict(_load_doc(config_file))
    experiment_id = ws.experiments.run_experiment(config)
    _echo({"experiment": experiment_id})


@exp.command("list")
@click.pass_context
def exp_list(ctx):
    ws = _ws(ctx)
    _echo(ws.experiments.list_experiments())


@exp.command("show")
@click.argument("experiment_id")
@click.pass_context
def exp_show(ctx, experiment_id):
    ws = _ws(ctx)
    record = ws.experiments.get_experiment(experiment_id)
    _echo(
        {
            "id": record.id,
            "data_commit": record.data_commit,
            "trials": [
                {
                    "trial_id": t.trial_id,
                    "state": t.state,
                    "rung": t.rung,
                    "hparams": t.hparams,
                    "metrics": t.metrics,
                    "checkpoints": t.checkpoints,
                }
                for t in record.trial_list()
            ],
        }
    )


@exp.command("best")
@click.argument("experiment_id")
@click.option("--metric", default="validation_accuracy")
@click.option("--max", "direction", flag_value="max", default=True)
@click.option("--min", "direction", flag_value="min")
@click.pass_context
def exp_best(ctx, experiment_id, metric, direction):
    ws = _ws(ctx)
    ckpt = ws.experiments.best_checkpoint(experiment_id, metric, direction)
    _echo(
        {
            "checkpoint": ckpt.id,
            "trial_id": ckpt.trial_id,
            "step": ckpt.step,
            "metrics": ckpt.metrics_snapshot,
        }
    )


# -- model registry --


@main.group()
def model():
    """Role-gated model registry."""


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


@model.command("register")
@click.argument("name")
@click.option("--checkpoint", required=True)
@click.option("--experiment", required=True)
@click.option("--snapshot", "source_snapshot", required=True)
@click.option("--as", "actor", required=True)
@click.option("--description", default="")
@click.pass_context
def model_register(ctx, name, checkpoint, experiment, source_snapshot, actor, description):
    ws = _ws(ctx)
    mv = ws.models.register_model(
        name, checkpoint, experiment, source_snapshot, actor, description=description
    )
    _echo(_version_view(mv))


@model.command("metrics")
@click.argument("name")
@click.argument("version", type=int)
@click.option("--set", "pairs", multiple=True, help="metric=value, e.g. test_accuracy=0.74")
@click.pass_context
def model_metrics(ctx, name, version, pairs):
    ws = _ws(ctx)
    metrics = {}
    for pair in pairs:
        key, _, value = pair.partition("=")
        metrics[key] = float(value)
    mv = ws.models.attach_test_metrics(name, version, metrics)
    _echo(_version_view(mv))


@model.command("submit")
@click.argument("name")
@click.argument("version", type=int)
@click.option("--as", "actor", required=True)
@click.pass_context
def model_submit(ctx, name, version, actor):
    ws = _ws(ctx)
    _echo(_version_view(ws.models.submit(name, version, actor)))


@model.command("review")
@click.argument("name")
@click.argument("version", type=int)
@click.argument("decision", type=click.Choice(["approve", "reject"]))
@click.option("--as", "actor", required=True)
@click.pass_context
def model_review(ctx, name, version, decision, actor):
    ws = _ws(ctx)
    _echo(_version_view(ws.models.review(name, version, decision, actor)))


@model.command("promote")
@click.argument("name")
@click.argument("version", type=int)
@click.option("--as", "actor", required=True)
@click.pass_context
def model_promote(ctx, name, version, actor):
    ws = _ws(ctx)
    _echo(_version_view(ws.models.promote_to_production(name, version, actor)))


@model.command("show")
@click.argument("name")
@click.pass_context
def model_show(ctx, name):
    ws = _ws(ctx)
    _echo([_version_view(mv) for mv in ws.models.get_model(name)])


# -- serving --


@main.command()
@click.argument("manifest_file", type=click.Path(exists=True))
@click.option("--staging", is_flag=True, default=False)
@click.pass_context
def deploy(ctx, manifest_file, staging):
    """Deploy a packaged model from a manifest file."""
    ws = _ws(ctx)
    manifest = _load_doc(manifest_file)
    wrapper = manifest.pop("wrapper", None)
    if wrapper is not None:
        version = manifest.get("selector", {}).get("version")
        if version is None:
            mv = ws.models.production_version(manifest["model_name"])
            version = mv.version if mv else None
        if version is not None:
            ws.serving.package_model(manifest["model_name"], int(version), wrapper)
    dep = ws.serving.deploy(manifest, staging=staging)
    _echo(
        {
            "deployment": dep.deployment_name,
            "endpoint": dep.endpoint,
            "model": dep.model_name,
            "version": dep.version,
            "package_hash": dep.package_hash,
        }
    )


@main.group()
def scoring():
    """Captured prediction requests."""


@scoring.command("tail")
@click.argument("deployment")
@click.option("-n", "count", default=10)
@click.pass_context
def scoring_tail(ctx, deployment, count):
    ws = _ws(ctx)
    _echo(ws.serving.scoring_records(deployment)[-count:])


# -- workflow --


@main.command()
@click.argument("step_id")
@click.option("--as", "actor", required=True)
@click.option("--project", default=None)
@click.option("--note", default="")
@click.pass_context
def step(ctx, step_id, actor, project, note):
    """Advance the workflow: dlflow step <step-id> --as <actor>."""
    ws = _ws(ctx)
    if step_id == "project-start":
        run = ws.workflow.start(actor, project=project, note=note)
    else:
        run = ws.workflow.advance(step_id, actor, project=project, note=note)
    _echo({"project": run.project, "current_step": run.current_step, "iteration": run.iteration})


@main.command()
@click.argument("which", type=click.Choice(["news", "fashion"]))
@click.option("--workdir", default=None, help="clean root to run in (defaults to --root)")
@click.pass_context
def usecase(ctx, which, workdir):
    """Run a scripted end-to-end iteration."""
    target = workdir or ctx.obj.get("root") or ".dlflow"
    report = run_use_case(which, target)
    _echo(report)


@main.command("trace")
@click.argument("target")  # <model>@<version>
@click.pass_context
def trace_cmd(ctx, target):
    ws = _ws(ctx)
    name, _, version = target.partition("@")
    _echo(trace_model(ws, name, int(version)))


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
@click.pass_context
def serve(ctx, host, port):
    """Run the HTTP orchestrator and inference server."""
    import uvicorn

    from .httpapi import create_app

    uvicorn.run(create_app(ctx.obj.get("root")), host=host, port=port)


if __name__ == "__main__":
    main()
