"""Experiment registry and searcher runtime.

Runs trials against the learner contract, persists metric series and
checkpoints (artifacts live as blobs in the reserved `_experiments` repo,
one branch per experiment), and schedules hyperparameter search: single,
grid, random, and successive-halving with early stopping (asynchronous
rule, plus a synchronous mode whose behavior is classic sequential
successive halving).
"""

import itertools
import json
import math
import random
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._util import append_record, flocked, read_records, write_json
from .contract import DataSource, get_learner
from .errors import (
    DataNotFound,
    InvalidConfig,
    NoCompletedTrials,
    NonMonotonicStep,
    NotFound,
)
from .labels import LabelStore
from .store import DataStore

EXPERIMENTS_REPO = "_experiments"

_UUID_NS = uuid.uuid5(uuid.NAMESPACE_URL, "dlflow/checkpoints")


def metric_direction(metric: str, declared: Optional[dict] = None) -> str:
    if declared and metric in declared:
        return declared[metric]
    if metric.endswith("loss"):
        return "min"
    return "max"


# -- hyperparameter space --


@dataclass(frozen=True)
class Domain:
    kind: str  # categorical | int | float
    choices: tuple = ()
    lo: float = 0.0
    hi: float = 0.0
    scale: str = "linear"

    def validate(self, name: str) -> None:
        if self.kind == "categorical":
            if not self.choices:
                raise InvalidConfig(f"{name}: empty categorical domain")
            return
        if self.lo >= self.hi:
            raise InvalidConfig(f"{name}: lo must be < hi")
        if self.kind == "float" and self.scale == "log" and self.lo <= 0:
            raise InvalidConfig(f"{name}: log range requires lo > 0")


def parse_space(raw: dict) -> dict[str, Domain]:
    space = {}
    for name, dom in raw.items():
        if not isinstance(dom, dict):
            raise InvalidConfig(f"{name}: domain must be a mapping")
        if "categorical" in dom:
            space[name] = Domain("categorical", choices=tuple(dom["categorical"]))
        elif "int" in dom:
            lo, hi = dom["int"]
            space[name] = Domain("int", lo=int(lo), hi=int(hi))
        elif "float" in dom:
            lo, hi = dom["float"]
            space[name] = Domain(
                "float", lo=float(lo), hi=float(hi), scale=dom.get("scale", "linear")
            )
        else:
            raise InvalidConfig(f"{name}: unknown domain {dom!r}")
        space[name].validate(name)
    return space


def _is_space(hparams: dict) -> bool:
    return any(isinstance(v, dict) for v in hparams.values())


def enumerate_grid(space: dict[str, Domain]) -> list[dict]:
    names = sorted(space)
    axes = []
    for name in names:
        dom = space[name]
        if dom.kind == "categorical":
            axes.append(list(dom.choices))
        elif dom.kind == "int":
            axes.append(list(range(int(dom.lo), int(dom.hi) + 1)))
        else:
            raise InvalidConfig(f"{name}: grid search cannot enumerate float ranges")
    return [dict(zip(names, combo)) for combo in itertools.product(*axes)]


def sample_assignment(space: dict[str, Domain], rng: random.Random) -> dict:
    out = {}
    for name in sorted(space):
        dom = space[name]
        if dom.kind == "categorical":
            out[name] = rng.choice(list(dom.choices))
        elif dom.kind == "int":
            out[name] = rng.randint(int(dom.lo), int(dom.hi))
        elif dom.scale == "log":
            out[name] = math.exp(rng.uniform(math.log(dom.lo), math.log(dom.hi)))
        else:
            out[name] = rng.uniform(dom.lo, dom.hi)
    return out


# -- config --


@dataclass
class ExperimentConfig:
    name: str
    data_source: dict  # {repo, ref, split}
    entry_point: str
    hparams: dict
    searcher: dict
    seed: int = 0
    resources: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    objective: dict = field(default_factory=lambda: {"metric": "validation_accuracy", "direction": "max"})
    metric_directions: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(doc: dict) -> "ExperimentConfig":
        return ExperimentConfig(
            name=doc["name"],
            data_source=dict(doc["data_source"]),
            entry_point=doc["entry_point"],
            hparams=dict(doc.get("hparams", {})),
            searcher=dict(doc["searcher"]),
            seed=int(doc.get("seed", 0)),
            resources=dict(doc.get("resources", {})),
            metadata=dict(doc.get("metadata", {})),
            objective=dict(doc.get("objective", {"metric": "validation_accuracy", "direction": "max"})),
            metric_directions=dict(doc.get("metric_directions", {})),
        )

    def validate(self) -> None:
        kind = self.searcher.get("kind")
        if kind not in ("single", "grid", "random", "asha"):
            raise InvalidConfig(f"unknown searcher kind {kind!r}")
        for key in ("repo", "ref", "split"):
            if key not in self.data_source:
                raise InvalidConfig(f"data_source missing {key!r}")
        if kind == "single":
            if _is_space(self.hparams):
                raise InvalidConfig("single searcher needs a fixed assignment")
            if "steps" not in self.searcher:
                raise InvalidConfig("single searcher needs steps")
        elif kind in ("grid", "random"):
            if not _is_space(self.hparams):
                raise InvalidConfig(f"{kind} searcher needs a hyperparameter space")
            parse_space(self.hparams)
            if "steps" not in self.searcher:
                raise InvalidConfig(f"{kind} searcher needs steps")
            if kind == "random":
                if int(self.searcher.get("n", 0)) < 1:
                    raise InvalidConfig("random searcher needs n >= 1")
                if "seed" not in self.searcher:
                    raise InvalidConfig("random searcher needs a seed")
        else:  # asha
            if not _is_space(self.hparams):
                raise InvalidConfig("asha searcher needs a hyperparameter space")
            parse_space(self.hparams)
            r = int(self.searcher.get("min_resource", 0))
            big_r = int(self.searcher.get("max_resource", 0))
            eta = int(self.searcher.get("reduction_factor", 0))
            if not (big_r >= r >= 1):
                raise InvalidConfig("asha requires max_resource >= min_resource >= 1")
            if eta < 2:
                raise InvalidConfig("asha requires reduction_factor >= 2")
            if int(self.searcher.get("max_trials", 0)) < 1:
                raise InvalidConfig("asha requires max_trials >= 1")
            if "seed" not in self.searcher:
                raise InvalidConfig("asha searcher needs a seed")


# -- scheduler state and decision rule --


def rung_budgets(min_resource: int, max_resource: int, eta: int) -> list[int]:
    """Cumulative step budget per rung: r * eta^k, capped by R."""
    budgets = []
    b = min_resource
    while b <= max_resource:
        budgets.append(b)
        b *= eta
    return budgets


@dataclass
class AshaState:
    eta: int
    max_trials: int
    top_rung: int
    larger_is_better: bool
    synchronous: bool = False
    n_started: int = 0
    completed: dict[int, list[tuple[str, float]]] = field(default_factory=dict)
    promoted: set = field(default_factory=set)  # (trial_id, from_rung)

    def record_completion(self, trial_id: str, rung: int, score: float) -> None:
        self.completed.setdefault(rung, []).append((trial_id, score))

    def _ranked(self, rung: int) -> list[tuple[str, float]]:
        rows = self.completed.get(rung, [])
        sign = -1.0 if self.larger_is_better else 1.0
        return sorted(rows, key=lambda ts: (sign * ts[1], ts[0]))

    def promotions_from(self, rung: int) -> int:
        return sum(1 for (_t, k) in self.promoted if k == rung)


def asha_decide(state: AshaState) -> tuple:
    """Next scheduling action: ("promote", trial_id, rung+1), ("start",), or
    ("halt",).

    A trial completed at rung k is promotable iff it ranks in the top
    floor(n_k / eta) of all trials completed at rung k (ties to the lower
    trial id). The synchronous mode gates promotions until a rung's full
    population has finished, which reproduces sequential successive halving.
    """
    if state.synchronous:
        if state.n_started < state.max_trials:
            return ("start",)
        population = state.max_trials
        for k in range(state.top_rung):
            done = len(state.completed.get(k, []))
            quota = population // state.eta
            if done == population and state.promotions_from(k) < quota:
                for trial_id, _score in state._ranked(k)[:quota]:
                    if (trial_id, k) not in state.promoted:
                        return ("promote", trial_id, k + 1)
            population = quota
            if population == 0:
                break
        return ("halt",)

    for k in range(state.top_rung - 1, -1, -1):
        rows = state.completed.get(k, [])
        quota = len(rows) // state.eta
        if quota == 0:
            continue
        for trial_id, _score in state._ranked(k)[:quota]:
            if (trial_id, k) not in state.promoted:
                return ("promote", trial_id, k + 1)
    if state.n_started < state.max_trials:
        return ("start",)
    return ("halt",)


# -- records --


@dataclass
class Checkpoint:
    id: str
    trial_id: str
    step: int
    artifacts: dict[str, str]  # name -> blob id
    metrics_snapshot: dict[str, float]


@dataclass
class TrialRecord:
    trial_id: str
    hparams: dict
    state: str  # created | running | completed | early-stopped | errored
    rung: int = 0
    metrics: list = field(default_factory=list)  # (step, {name: value})
    checkpoints: list = field(default_factory=list)  # checkpoint ids
    error: str = ""


@dataclass
class ExperimentRecord:
    id: str
    config: ExperimentConfig
    data_commit: str
    data_tree_digest: str
    trials: dict[str, TrialRecord]
    checkpoints: dict[str, Checkpoint]

    def trial_list(self) -> list[TrialRecord]:
        return [self.trials[t] for t in sorted(self.trials)]


class ExperimentTracker:
    def __init__(self, root: Path, data: DataStore, labels: LabelStore, clock):
        self.root = Path(root)
        self.data = data
        self.labels = labels
        self.clock = clock

    # -- paths --

    def _dir(self, experiment_id: str) -> Path:
        return self.root / "experiments" / experiment_id

    @property
    def _index_path(self) -> Path:
        return self.root / "experiments" / "index.jsonl"

    # -- public queries --

    def list_experiments(self) -> list[dict]:
        return read_records(self._index_path)

    def get_experiment(self, experiment_id: str) -> ExperimentRecord:
        exp_dir = self._dir(experiment_id)
        if not exp_dir.exists():
            raise NotFound(f"experiment {experiment_id!r} not found")
        doc = json.loads((exp_dir / "config.json").read_text())
        config = ExperimentConfig.from_dict(doc["config"])
        trials: dict[str, TrialRecord] = {}
        for rec in read_records(exp_dir / "trials.jsonl"):
            trial = trials.setdefault(
                rec["trial_id"], TrialRecord(rec["trial_id"], rec.get("hparams", {}), "created")
            )
            if rec.get("hparams"):
                trial.hparams = rec["hparams"]
            trial.state = rec.get("state", trial.state)
            trial.rung = rec.get("rung", trial.rung)
            trial.error = rec.get("error", trial.error)
        for rec in read_records(exp_dir / "metrics.jsonl"):
            trials[rec["trial_id"]].metrics.append((rec["step"], rec["values"]))
        checkpoints: dict[str, Checkpoint] = {}
        for rec in read_records(exp_dir / "checkpoints.jsonl"):
            ckpt = Checkpoint(
                rec["id"], rec["trial_id"], rec["step"], rec["artifacts"], rec["metrics_snapshot"]
            )
            checkpoints[ckpt.id] = ckpt
            trials[ckpt.trial_id].checkpoints.append(ckpt.id)
        return ExperimentRecord(
            id=experiment_id,
            config=config,
            data_commit=doc["data_commit"],
            data_tree_digest=doc["data_tree_digest"],
            trials=trials,
            checkpoints=checkpoints,
        )

    def get_checkpoint(self, checkpoint_id: str) -> tuple[str, Checkpoint]:
        """Find a checkpoint by UUID across experiments; returns (exp_id, ckpt)."""
        for entry in self.list_experiments():
            exp_dir = self._dir(entry["id"])
            for rec in read_records(exp_dir / "checkpoints.jsonl"):
                if rec["id"] == checkpoint_id:
                    return entry["id"], Checkpoint(
                        rec["id"], rec["trial_id"], rec["step"], rec["artifacts"], rec["metrics_snapshot"]
                    )
        raise NotFound(f"checkpoint {checkpoint_id!r} not found")

    def read_artifacts(self, checkpoint: Checkpoint) -> dict[str, bytes]:
        return {name: self.data.objects.get(oid) for name, oid in checkpoint.artifacts.items()}

    def log_metrics(self, experiment_id: str, trial_id: str, step: int, values: dict) -> None:
        path = self._dir(experiment_id) / "metrics.jsonl"
        with flocked(self.root / "locks" / f"metrics-{experiment_id}.lock"):
            last = -1
            for rec in read_records(path):
                if rec["trial_id"] == trial_id:
                    last = max(last, rec["step"])
            if step <= last:
                raise NonMonotonicStep(f"step {step} <= last logged step {last} for {trial_id}")
            append_record(path, {"trial_id": trial_id, "step": step, "values": values})

    def best_checkpoint(self, experiment_id: str, metric: str, direction: str = "max") -> Checkpoint:
        exp = self.get_experiment(experiment_id)
        candidates = []
        for trial in exp.trial_list():
            if trial.state not in ("completed", "early-stopped"):
                continue
            for ckpt_id in trial.checkpoints:
                ckpt = exp.checkpoints[ckpt_id]
                if metric not in ckpt.metrics_snapshot:
                    continue
                candidates.append(ckpt)
        if not candidates:
            raise NoCompletedTrials(f"experiment {experiment_id!r} has no completed trials")
        sign = -1.0 if direction == "max" else 1.0
        candidates.sort(key=lambda c: (sign * c.metrics_snapshot[metric], c.trial_id, c.step))
        return candidates[0]

    # -- execution --

    def run_experiment(self, config: ExperimentConfig) -> str:
        config.validate()
        get_learner(config.entry_point)
        ds = config.data_source
        try:
            commit = self.data.resolve_ref(ds["repo"], ds["ref"])
        except NotFound as exc:
            raise DataNotFound(str(exc)) from exc
        labels = self.labels.query_labels(ds["split"], ds["repo"], commit.id)
        if not labels:
            raise DataNotFound(
                f"no {ds['split']} labels at {ds['repo']}@{commit.id[:12]}"
            )

        experiment_id = f"{config.name}-{len(self.list_experiments()) + 1:04d}"
        exp_dir = self._dir(experiment_id)
        exp_dir.mkdir(parents=True)
        write_json(
            exp_dir / "config.json",
            {
                "config": {
                    "name": config.name,
                    "data_source": config.data_source,
                    "entry_point": config.entry_point,
                    "hparams": config.hparams,
                    "searcher": config.searcher,
                    "seed": config.seed,
                    "resources": config.resources,
                    "metadata": config.metadata,
                    "objective": config.objective,
                    "metric_directions": config.metric_directions,
                },
                "data_commit": commit.id,
                "data_tree_digest": commit.tree,
            },
        )
        append_record(
            self._index_path,
            {"id": experiment_id, "name": config.name, "created_at": self.clock.now()},
        )
        self.data.ensure_repo(EXPERIMENTS_REPO, internal=True)

        data_source = DataSource(
            repo=ds["repo"],
            ref=ds["ref"],
            commit=commit.id,
            split=ds["split"],
            seed=config.seed,
            reader=lambda path: self.data.read_file(ds["repo"], commit.id, path),
            tree_digest=commit.tree,
        )
        runner = _Runner(self, experiment_id, config, data_source, labels)
        if config.searcher["kind"] == "asha":
            runner.run_asha()
        else:
            runner.run_exhaustive()
        return experiment_id


class _Runner:
    """Sequential trial executor for one experiment."""

    def __init__(self, tracker: ExperimentTracker, experiment_id: str,
                 config: ExperimentConfig, data_source: DataSource, labels):
        self.tracker = tracker
        self.exp_id = experiment_id
        self.config = config
        self.data_source = data_source
        self.labels = labels
        self.exp_dir = tracker._dir(experiment_id)
        self._n_trials = 0

    # -- persistence helpers --

    def _trial_event(self, record: dict) -> None:
        append_record(self.exp_dir / "trials.jsonl", record)

    def _new_trial(self, hparams: dict) -> str:
        trial_id = f"{self._n_trials:04d}"
        self._n_trials += 1
        self._trial_event({"trial_id": trial_id, "hparams": hparams, "state": "created", "rung": 0})
        return trial_id

    def _trial_seed(self, trial_index: int) -> int:
        seq = np.random.SeedSequence(self.config.seed, spawn_key=(trial_index,))
        return int(seq.generate_state(1)[0])

    def _save_checkpoint(self, trial_id: str, step: int, learner, metrics: dict) -> Checkpoint:
        artifacts_bytes = learner.save()
        files = {
            f"{trial_id}/step-{step:06d}/{name}": blob
            for name, blob in artifacts_bytes.items()
        }
        self.tracker.data.commit_files(
            EXPERIMENTS_REPO,
            self.exp_id,
            files,
            author=f"experiment/{self.exp_id}",
            message=f"checkpoint {trial_id}@{step}",
        )
        artifacts = {
            name: self.tracker.data.objects.put(blob)
            for name, blob in artifacts_bytes.items()
        }
        ckpt_id = str(uuid.uuid5(_UUID_NS, f"{self.exp_id}:{trial_id}:{step}"))
        ckpt = Checkpoint(ckpt_id, trial_id, step, artifacts, dict(metrics))
        append_record(
            self.exp_dir / "checkpoints.jsonl",
            {
                "id": ckpt.id,
                "trial_id": trial_id,
                "step": step,
                "artifacts": artifacts,
                "metrics_snapshot": dict(metrics),
            },
        )
        return ckpt

    # -- trial segments --

    def _make_learner(self, trial_index: int, hparams: dict):
        learner = get_learner(self.config.entry_point)()
        learner.init(hparams, self._trial_seed(trial_index))
        learner.load_data(self.data_source, self.labels)
        return learner

    def _run_segment(self, trial_id: str, trial_index: int, hparams: dict,
                     from_step: int, to_step: int, restore_from: Optional[Checkpoint]):
        """Train a trial from from_step to to_step and checkpoint. Returns
        (checkpoint, eval_metrics) or None if the learner errored."""
        try:
            learner = self._make_learner(trial_index, hparams)
            if restore_from is not None:
                learner.restore(self.tracker.read_artifacts(restore_from))
            train_metrics = learner.train(to_step - from_step)
            eval_metrics = learner.evaluate()
        except Exception as exc:  # noqa: BLE001 - learner failures are captured
            self._trial_event(
                {"trial_id": trial_id, "state": "errored", "error": f"{type(exc).__name__}: {exc}"}
            )
            return None
        values = {**train_metrics, **eval_metrics}
        self.tracker.log_metrics(self.exp_id, trial_id, to_step, values)
        ckpt = self._save_checkpoint(trial_id, to_step, learner, eval_metrics)
        return ckpt, eval_metrics

    # -- searchers --

    def _assignments(self) -> list[dict]:
        kind = self.config.searcher["kind"]
        if kind == "single":
            return [dict(self.config.hparams)]
        space = parse_space(self.config.hparams)
        if kind == "grid":
            return enumerate_grid(space)
        rng = random.Random(int(self.config.searcher["seed"]))
        return [sample_assignment(space, rng) for _ in range(int(self.config.searcher["n"]))]

    def run_exhaustive(self) -> None:
        steps = int(self.config.searcher["steps"])
        for index, assignment in enumerate(self._assignments()):
            trial_id = self._new_trial(assignment)
            self._trial_event({"trial_id": trial_id, "state": "running"})
            result = self._run_segment(trial_id, index, assignment, 0, steps, None)
            if result is not None:
                self._trial_event({"trial_id": trial_id, "state": "completed", "rung": 0})

    def run_asha(self) -> None:
        searcher = self.config.searcher
        eta = int(searcher["reduction_factor"])
        budgets = rung_budgets(
            int(searcher["min_resource"]), int(searcher["max_resource"]), eta
        )
        top_rung = len(budgets) - 1
        max_trials = int(searcher["max_trials"])
        metric = self.config.objective.get("metric", "validation_accuracy")
        direction = self.config.objective.get(
            "direction", metric_direction(metric, self.config.metric_directions)
        )
        state = AshaState(
            eta=eta,
            max_trials=max_trials,
            top_rung=top_rung,
            larger_is_better=(direction == "max"),
            synchronous=bool(searcher.get("synchronous", False)),
        )
        sampler = random.Random(int(searcher["seed"]))
        space = parse_space(self.config.hparams)

        trial_meta: dict[str, dict] = {}  # trial_id -> {index, hparams, rung, last_ckpt}

        while True:
            decision = asha_decide(state)
            if decision[0] == "halt":
                break
            if decision[0] == "start":
                assignment = sample_assignment(space, sampler)
                trial_id = self._new_trial(assignment)
                state.n_started += 1
                meta = {"index": self._n_trials - 1, "hparams": assignment, "rung": 0, "ckpt": None}
                trial_meta[trial_id] = meta
                self._trial_event({"trial_id": trial_id, "state": "running"})
                result = self._run_segment(trial_id, meta["index"], assignment, 0, budgets[0], None)
                if result is None:
                    trial_meta.pop(trial_id)
                    continue
                ckpt, metrics = result
                meta["ckpt"] = ckpt
                if metric not in metrics:
                    self._trial_event(
                        {"trial_id": trial_id, "state": "errored",
                         "error": f"objective metric {metric!r} missing from evaluation"}
                    )
                    trial_meta.pop(trial_id)
                    continue
                state.record_completion(trial_id, 0, float(metrics[metric]))
                continue

            _, trial_id, next_rung = decision
            meta = trial_meta[trial_id]
            state.promoted.add((trial_id, next_rung - 1))
            result = self._run_segment(
                trial_id,
                meta["index"],
                meta["hparams"],
                budgets[next_rung - 1],
                budgets[next_rung],
                meta["ckpt"],
            )
            if result is None:
                trial_meta.pop(trial_id)
                continue
            ckpt, metrics = result
            meta["ckpt"] = ckpt
            meta["rung"] = next_rung
            state.record_completion(trial_id, next_rung, float(metrics[metric]))
            self._trial_event({"trial_id": trial_id, "state": "running", "rung": next_rung})

        for trial_id, meta in trial_meta.items():
            final = "completed" if meta["rung"] == top_rung else "early-stopped"
            self._trial_event({"trial_id": trial_id, "state": final, "rung": meta["rung"]})
