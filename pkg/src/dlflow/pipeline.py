"""Versioned transforms over input repos with recorded provenance.

A pipeline spec is content-addressed by its canonical serialization; running
it commits the transform output to the pipeline's own repo and appends a
provenance record linking output commit -> (spec hash, input commits).
Re-running on unchanged inputs returns the previously produced commit, so
output commit ids are a pure function of (spec, input commits) in
deterministic timestamp mode.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ._util import append_record, digest_of, flocked, keyed_hash_u64, read_records
from .errors import (
    InvalidFraction,
    InvalidName,
    MissingInputRepo,
    NotFound,
    UnknownTransform,
)
from .store import DataStore

_TWO64 = float(2**64)

TransformFn = Callable[[list[dict[str, bytes]], dict], tuple[dict[str, bytes], list[str]]]

_TRANSFORMS: dict[str, TransformFn] = {}


def register_transform(transform_id: str, fn: TransformFn) -> None:
    _TRANSFORMS[transform_id] = fn


def transform_ids() -> list[str]:
    return sorted(_TRANSFORMS)


# -- built-in transforms --


def clean_validate_text(inputs, params):
    """Replace invalid UTF-8 with U+FFFD; drop files below min_chars or with
    the wrong extension."""
    min_chars = int(params.get("min_chars", 50))
    extension = params.get("extension", ".txt")
    (tree,) = inputs
    out: dict[str, bytes] = {}
    dropped_ext = dropped_short = 0
    for path in sorted(tree):
        if not path.endswith(extension):
            dropped_ext += 1
            continue
        text = tree[path].decode("utf-8", errors="replace")
        if len(text) < min_chars:
            dropped_short += 1
            continue
        out[path] = text.encode("utf-8")
    log = [
        f"kept {len(out)} files",
        f"discarded {dropped_ext} with extension != {extension}",
        f"discarded {dropped_short} shorter than {min_chars} chars",
    ]
    return out, log


def split_dataset(inputs, params):
    """Route each file to train/<path> or test/<path> by a keyed hash of
    (seed, path). Routing never depends on corpus size or order."""
    fraction = float(params["train_fraction"])
    seed = int(params["seed"])
    if not 0.0 < fraction < 1.0:
        raise InvalidFraction(f"train_fraction {fraction} outside (0, 1)")
    (tree,) = inputs
    out: dict[str, bytes] = {}
    n_train = 0
    for path, content in tree.items():
        if keyed_hash_u64(seed, path) / _TWO64 < fraction:
            out[f"train/{path}"] = content
            n_train += 1
        else:
            out[f"test/{path}"] = content
    log = [f"train {n_train}", f"test {len(tree) - n_train}"]
    return out, log


def route_split(seed: int, fraction: float, path: str) -> str:
    """Which side a path lands on; exposed for stability checks."""
    return "train" if keyed_hash_u64(seed, path) / _TWO64 < fraction else "test"


register_transform("clean-validate-text", clean_validate_text)
register_transform("split-dataset", split_dataset)


# -- spec / job / provenance records --


@dataclass(frozen=True)
class PipelineSpec:
    name: str
    inputs: tuple[tuple[str, str], ...]  # (repo, branch)
    transform: str
    params: dict
    trigger: str = "manual"  # or "on-commit"
    resources: dict = field(default_factory=dict)

    @property
    def output_repo(self) -> str:
        return self.name

    def canonical(self) -> dict:
        return {
            "name": self.name,
            "inputs": [list(pair) for pair in self.inputs],
            "transform": self.transform,
            "params": self.params,
            "output_repo": self.output_repo,
            "trigger": self.trigger,
            "resources": self.resources,
        }

    @property
    def spec_hash(self) -> str:
        return digest_of(self.canonical())

    @staticmethod
    def from_dict(doc: dict) -> "PipelineSpec":
        inputs = tuple(
            (i["repo"], i.get("branch", "master")) if isinstance(i, dict) else (i[0], i[1])
            for i in doc["inputs"]
        )
        return PipelineSpec(
            name=doc["name"],
            inputs=inputs,
            transform=doc["transform"],
            params=doc.get("params", {}),
            trigger=doc.get("trigger", "manual"),
            resources=doc.get("resources", {}),
        )


@dataclass
class Job:
    id: str
    pipeline: str
    spec_hash: str
    input_commits: list[str]
    output_commit: Optional[str]
    status: str  # pending | running | succeeded | failed
    log: str


@dataclass(frozen=True)
class ProvenanceRecord:
    output_commit: str
    spec_hash: str
    input_commits: tuple[str, ...]


class PipelineEngine:
    def __init__(self, root: Path, data: DataStore):
        self.root = Path(root)
        self.data = data
        self._pending: list[str] = []  # pipeline names awaiting a run
        data.on_commit(self._on_commit)

    # -- paths --

    @property
    def _specs_path(self) -> Path:
        return self.root / "pipelines" / "specs.jsonl"

    @property
    def _jobs_path(self) -> Path:
        return self.root / "pipelines" / "jobs.jsonl"

    @property
    def _provenance_path(self) -> Path:
        return self.root / "provenance.jsonl"

    # -- registration --

    def register(self, spec: PipelineSpec) -> str:
        if spec.transform not in _TRANSFORMS:
            raise UnknownTransform(f"transform {spec.transform!r} not registered")
        for repo, _branch in spec.inputs:
            if not self.data.repo_exists(repo):
                raise MissingInputRepo(f"input repo {repo!r} does not exist")
            if repo == spec.output_repo:
                raise InvalidName(f"pipeline {spec.name!r} cannot consume its own output repo")
        self.data.ensure_repo(spec.output_repo)
        record = {"spec_hash": spec.spec_hash, **spec.canonical()}
        existing = {rec["spec_hash"] for rec in read_records(self._specs_path)}
        if spec.spec_hash not in existing:
            append_record(self._specs_path, record)
        return spec.spec_hash

    def get_spec(self, name: str) -> PipelineSpec:
        found = None
        for rec in read_records(self._specs_path):
            if rec["name"] == name:
                found = rec
        if found is None:
            raise NotFound(f"pipeline {name!r} not registered")
        return PipelineSpec(
            name=found["name"],
            inputs=tuple(tuple(pair) for pair in found["inputs"]),
            transform=found["transform"],
            params=found["params"],
            trigger=found["trigger"],
            resources=found["resources"],
        )

    def list_specs(self) -> list[dict]:
        latest: dict[str, dict] = {}
        for rec in read_records(self._specs_path):
            latest[rec["name"]] = rec
        return [latest[name] for name in sorted(latest)]

    # -- triggers --

    def _on_commit(self, commit) -> None:
        for rec in self.list_specs():
            if rec["trigger"] != "on-commit":
                continue
            if (commit.repo, commit.branch) in {tuple(p) for p in rec["inputs"]}:
                self._pending.append(rec["name"])

    @property
    def pending(self) -> list[str]:
        return list(self._pending)

    def run_pending(self, max_jobs: int = 100) -> list[Job]:
        """Execute queued jobs; output commits may enqueue downstream
        pipelines, which are drained too."""
        jobs = []
        ran = 0
        while self._pending:
            if ran >= max_jobs:
                raise RuntimeError("pipeline cascade exceeded max_jobs; cycle?")
            name = self._pending.pop(0)
            jobs.append(self.run_job(name))
            ran += 1
        return jobs

    # -- execution --

    def _next_job_id(self) -> str:
        n = len(read_records(self._jobs_path))
        return f"job-{n + 1:06d}"

    def provenance_records(self) -> list[ProvenanceRecord]:
        return [
            ProvenanceRecord(rec["output_commit"], rec["spec_hash"], tuple(rec["input_commits"]))
            for rec in read_records(self._provenance_path)
        ]

    def provenance_for(self, commit_id: str) -> Optional[ProvenanceRecord]:
        for rec in self.provenance_records():
            if rec.output_commit == commit_id:
                return rec
        return None

    def run_job(self, name: str) -> Job:
        spec = self.get_spec(name)
        job_id = self._next_job_id()
        input_commits = []
        for repo, branch in spec.inputs:
            head = self.data.head(repo, branch)
            if head is None:
                raise NotFound(f"input branch {repo}@{branch} has no commits")
            input_commits.append(head)

        # replay: identical spec + inputs already produced a commit
        for rec in self.provenance_records():
            if rec.spec_hash == spec.spec_hash and list(rec.input_commits) == input_commits:
                job = Job(job_id, name, spec.spec_hash, input_commits, rec.output_commit, "succeeded", "replayed: inputs unchanged")
                append_record(self._jobs_path, self._job_record(job))
                return job

        trees = [
            self.data.read_all_files(repo, commit_id)
            for (repo, _), commit_id in zip(spec.inputs, input_commits)
        ]
        transform = _TRANSFORMS[spec.transform]
        try:
            output_files, log_lines = transform(trees, spec.params)
        except Exception as exc:  # noqa: BLE001 - job captures any transform error
            job = Job(job_id, name, spec.spec_hash, input_commits, None, "failed", f"{type(exc).__name__}: {exc}")
            append_record(self._jobs_path, self._job_record(job))
            return job

        with flocked(self.root / "locks" / f"pipeline-{name}.lock"):
            commit = self.data.commit_files(
                spec.output_repo,
                "master",
                output_files,
                author=f"pipeline/{name}",
                message=f"run {spec.spec_hash[:12]} on {','.join(c[:12] for c in input_commits)}",
            )
            append_record(
                self._provenance_path,
                {
                    "output_commit": commit.id,
                    "spec_hash": spec.spec_hash,
                    "input_commits": input_commits,
                },
            )
        job = Job(job_id, name, spec.spec_hash, input_commits, commit.id, "succeeded", "\n".join(log_lines))
        append_record(self._jobs_path, self._job_record(job))
        return job

    @staticmethod
    def _job_record(job: Job) -> dict:
        return {
            "id": job.id,
            "pipeline": job.pipeline,
            "spec_hash": job.spec_hash,
            "input_commits": job.input_commits,
            "output_commit": job.output_commit,
            "status": job.status,
            "log": job.log,
        }

    def jobs(self) -> list[Job]:
        return [
            Job(rec["id"], rec["pipeline"], rec["spec_hash"], rec["input_commits"], rec["output_commit"], rec["status"], rec["log"])
            for rec in read_records(self._jobs_path)
        ]

    # -- lineage --

    def get_lineage(self, commit_id: str) -> dict:
        """Transitive provenance closure: nodes are commit ids, edges carry
        the spec hash that connects inputs to outputs."""
        commit_id = self.data.find_commit(commit_id).id
        by_output = {rec.output_commit: rec for rec in self.provenance_records()}
        nodes = set()
        edges = []
        frontier = [commit_id]
        while frontier:
            current = frontier.pop()
            if current in nodes:
                continue
            nodes.add(current)
            rec = by_output.get(current)
            if rec is None:
                continue
            for parent in rec.input_commits:
                edges.append({"from": parent, "to": current, "spec_hash": rec.spec_hash})
                frontier.append(parent)
        return {"root": commit_id, "nodes": sorted(nodes), "edges": edges}
