"""Successive-halving scheduler: decision-rule contract, equivalence with the
sequential oracle in synchronous mode, and safety in asynchronous mode."""

import json

import pytest

import dlflow.experiment as experiment_mod
from dlflow.contract import TrialContract, register_learner
from dlflow.experiment import AshaState, ExperimentConfig, asha_decide, rung_budgets
from sha_oracle import run_sha


def objective(x: int, steps: int) -> float:
    """Deterministic synthetic learning curve: distinct plateaus per config,
    strictly increasing in steps."""
    plateau = ((x * 37) % 101) / 101.0
    return plateau * (1.0 - 0.5 ** steps)


class SyntheticObjectiveTrial(TrialContract):
    def __init__(self):
        self.hparams = {}
        self.steps = 0

    def init(self, hparams, seed):
        self.hparams = dict(hparams)

    def load_data(self, data_source, labels):
        pass

    def train(self, budget):
        self.steps += budget
        return {"train_loss": 1.0 / (1.0 + self.steps)}

    def evaluate(self):
        return {"validation_accuracy": objective(int(self.hparams["x"]), self.steps)}

    def save(self):
        return {"weights": json.dumps({"steps": self.steps}).encode(), "labels": b"[]"}

    def restore(self, artifacts):
        self.steps = json.loads(artifacts["weights"].decode())["steps"]


register_learner("synthetic-objective", SyntheticObjectiveTrial)


@pytest.fixture
def search_ws(ws):
    ws.data.create_repo("data")
    commit = ws.data.commit_files("data", "master", {"c/f.txt": b"x"}, "ada", "m")
    ws.labels.auto_label("data", commit.id, "train")
    return ws


def _asha_config(synchronous: bool, max_trials=9, seed=29) -> ExperimentConfig:
    return ExperimentConfig(
        name="search",
        data_source={"repo": "data", "ref": "master", "split": "train"},
        entry_point="synthetic-objective",
        hparams={"x": {"int": [0, 999]}},
        searcher={
            "kind": "asha",
            "max_resource": 9,
            "min_resource": 1,
            "reduction_factor": 3,
            "max_trials": max_trials,
            "seed": seed,
            "synchronous": synchronous,
        },
        seed=7,
    )


# -- decision rule unit contract --


def _state(**kw):
    base = dict(eta=3, max_trials=9, top_rung=2, larger_is_better=True)
    base.update(kw)
    return AshaState(**base)


def test_three_completed_promotes_top_one():
    state = _state(n_started=3)
    state.record_completion("0000", 0, 0.9)
    state.record_completion("0001", 0, 0.5)
    state.record_completion("0002", 0, 0.4)
    assert asha_decide(state) == ("promote", "0000", 1)


def test_two_completed_floor_zero_starts_new_config():
    state = _state(n_started=2)
    state.record_completion("0000", 0, 0.9)
    state.record_completion("0001", 0, 0.8)
    assert asha_decide(state) == ("start",)


def test_tie_broken_by_lower_trial_id():
    state = _state(n_started=3)
    state.record_completion("0002", 0, 0.7)
    state.record_completion("0000", 0, 0.7)
    state.record_completion("0001", 0, 0.2)
    assert asha_decide(state) == ("promote", "0000", 1)


def test_already_promoted_top_skipped():
    state = _state(n_started=6)
    for trial, score in [("0000", 0.9), ("0001", 0.8), ("0002", 0.7),
                         ("0003", 0.6), ("0004", 0.5), ("0005", 0.4)]:
        state.record_completion(trial, 0, score)
    state.promoted.add(("0000", 0))
    assert asha_decide(state) == ("promote", "0001", 1)


def test_halt_when_all_started_and_nothing_promotable():
    state = _state(n_started=9, max_trials=9)
    for i in range(2):
        state.record_completion(f"{i:04d}", 0, 0.5)
    assert asha_decide(state) == ("halt",)


def test_min_direction_promotes_smallest():
    state = _state(n_started=3, larger_is_better=False)
    state.record_completion("0000", 0, 0.9)
    state.record_completion("0001", 0, 0.2)
    state.record_completion("0002", 0, 0.5)
    assert asha_decide(state) == ("promote", "0001", 1)


def test_rung_budgets():
    assert rung_budgets(1, 9, 3) == [1, 3, 9]
    assert rung_budgets(5, 45, 3) == [5, 15, 45]
    assert rung_budgets(1, 10, 3) == [1, 3, 9]  # capped below R


# -- synchronous mode vs the sequential successive-halving oracle --


def test_sync_asha_matches_sha_oracle(search_ws):
    ws = search_ws
    exp_id = ws.experiments.run_experiment(_asha_config(synchronous=True))
    exp = ws.experiments.get_experiment(exp_id)
    trials = exp.trial_list()
    assert len(trials) == 9

    assignments = [int(t.hparams["x"]) for t in trials]
    oracle = run_sha(
        n_trials=9, eta=3, min_resource=1, max_resource=9,
        score=lambda t, steps: objective(assignments[t], steps),
        larger_is_better=True,
    )
    assert oracle.rung_budgets == [1, 3, 9]

    # rung populations: trial i is present at rung k iff it trained to budgets[k]
    for rung in range(3):
        scheduler_population = sorted(
            int(t.trial_id) for t in trials if t.rung >= rung and t.state != "errored"
        )
        assert scheduler_population == oracle.rung_populations[rung], f"rung {rung}"

    # promotions out of each rung
    for rung in (0, 1):
        promoted = sorted(int(t.trial_id) for t in trials if t.rung >= rung + 1)
        assert promoted == oracle.promotions[rung], f"promotions from rung {rung}"

    # final best config: the top-rung survivor
    survivors = [t for t in trials if t.rung == 2]
    assert len(survivors) == 1
    assert int(survivors[0].trial_id) == oracle.best_trial
    best = ws.experiments.best_checkpoint(exp_id, "validation_accuracy", "max")
    assert int(best.trial_id) == oracle.best_trial

    # metric table: the recorded series equals the objective at rung budgets
    for t in trials:
        for step, values in t.metrics:
            assert values["validation_accuracy"] == pytest.approx(
                objective(int(t.hparams["x"]), step), abs=0.0
            )


def test_sync_asha_trial_states(search_ws):
    ws = search_ws
    exp_id = ws.experiments.run_experiment(_asha_config(synchronous=True))
    exp = ws.experiments.get_experiment(exp_id)
    states = {t.state for t in exp.trial_list()}
    assert states == {"completed", "early-stopped"}
    completed = [t for t in exp.trial_list() if t.state == "completed"]
    assert len(completed) == 1
    for t in exp.trial_list():
        assert len(t.checkpoints) >= 1


# -- asynchronous mode safety --


def test_async_asha_safety_invariants(search_ws, monkeypatch):
    ws = search_ws
    decisions = []
    real_decide = asha_decide

    def spy(state):
        decision = real_decide(state)
        if decision[0] == "promote":
            _kind, trial_id, next_rung = decision
            rows = state.completed[next_rung - 1]
            quota = len(rows) // state.eta
            ranked = sorted(rows, key=lambda ts: (-ts[1], ts[0]))
            top_ids = [t for t, _s in ranked[:quota]]
            decisions.append((trial_id, next_rung - 1, top_ids))
            assert trial_id in top_ids, "promotion outside the top floor(n/eta)"
        return decision

    monkeypatch.setattr(experiment_mod, "asha_decide", spy)
    exp_id = ws.experiments.run_experiment(_asha_config(synchronous=False))
    exp = ws.experiments.get_experiment(exp_id)
    trials = exp.trial_list()
    assert len(trials) == 9
    assert decisions, "async run never promoted"

    budgets = {1, 3, 9}
    for t in trials:
        steps = [step for step, _values in t.metrics]
        assert max(steps) <= 9, "trained past max_resource"
        assert set(steps) <= budgets
        assert steps == sorted(steps)
    # rung populations shrink as rungs rise
    sizes = [sum(1 for t in trials if t.rung >= k) for k in range(3)]
    assert sizes[0] >= sizes[1] >= sizes[2] >= 1


def test_async_asha_reproducible(search_ws):
    ws = search_ws
    e1 = ws.experiments.run_experiment(_asha_config(synchronous=False))
    e2 = ws.experiments.run_experiment(_asha_config(synchronous=False))
    x1, x2 = ws.experiments.get_experiment(e1), ws.experiments.get_experiment(e2)
    for t1, t2 in zip(x1.trial_list(), x2.trial_list()):
        assert t1.hparams == t2.hparams
        assert t1.metrics == t2.metrics
        assert t1.rung == t2.rung
        assert t1.state == t2.state
