"""
Experiments and hyperparameter search
=====================================

A learner implements init / load_data / train / evaluate / save / restore;
the tracker runs it under a searcher, logs metric series, and checkpoints
artifacts into the versioned store. The successive-halving searcher trains
many configurations cheaply and promotes only the top 1/eta per rung.
"""

import tempfile

from dlflow import ExperimentConfig, Workspace
from dlflow.learners import NEWS_CATEGORIES, synth_corpus

ws = Workspace.init(tempfile.mkdtemp() + "/demo", deterministic=True)
ws.data.create_repo("corpus")
commit = ws.data.commit_files(
    "corpus", "master", synth_corpus(NEWS_CATEGORIES, 25, seed=3), "ada", "ingest"
)
ws.labels.auto_label("corpus", commit.id, "train")

# Grid search over a small space; every trial trains for the same budget.
grid = ExperimentConfig(
    name="grid-demo",
    data_source={"repo": "corpus", "ref": commit.id, "split": "train"},
    entry_point="text-mlp-5",
    hparams={
        "hidden_size": {"categorical": [16, 32]},
        "dropout": {"categorical": [0.0, 0.1]},
    },
    searcher={"kind": "grid", "steps": 15},
    seed=3,
)
grid_id = ws.experiments.run_experiment(grid)
for trial in ws.experiments.get_experiment(grid_id).trial_list():
    step, values = trial.metrics[-1]
    print(f"  trial {trial.trial_id} {trial.hparams} -> "
          f"val acc {values['validation_accuracy']:.3f} at step {step}")

# Early stopping: 6 configurations, budgets 5 -> 15 -> 45 steps, keep 1/3.
asha = ExperimentConfig(
    name="asha-demo",
    data_source={"repo": "corpus", "ref": commit.id, "split": "train"},
    entry_point="text-mlp-5",
    hparams={
        "hidden_size": {"categorical": [16, 32]},
        "learning_rate": {"float": [0.02, 0.2], "scale": "log"},
    },
    searcher={
        "kind": "asha", "min_resource": 5, "max_resource": 45,
        "reduction_factor": 3, "max_trials": 6, "seed": 17,
    },
    seed=3,
)
asha_id = ws.experiments.run_experiment(asha)
for trial in ws.experiments.get_experiment(asha_id).trial_list():
    steps = [s for s, _v in trial.metrics]
    print(f"  trial {trial.trial_id}: rung {trial.rung}, state {trial.state}, "
          f"trained to {max(steps)} steps")

best = ws.experiments.best_checkpoint(asha_id, "validation_accuracy", "max")
print("best checkpoint:", best.id, "from trial", best.trial_id,
      "val acc", round(best.metrics_snapshot["validation_accuracy"], 3))
