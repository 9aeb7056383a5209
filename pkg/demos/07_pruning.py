"""
Magnitude pruning with a regression check
=========================================

The compression hook: zero the globally smallest weights, freeze them, and
retrain briefly. The pruned model must stay within a small accuracy margin
of the original — here checked on a toy cluster task.
"""

import numpy as np

from dlflow.learners import Mlp, evaluate, prune_magnitude, train_step

rng = np.random.Generator(np.random.PCG64(14))
centers = np.array([[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]])
x = np.concatenate([rng.normal(c, 0.5, size=(40, 2)) for c in centers])
y = np.repeat(np.arange(4), 40)

model = Mlp([2, 24, 4], seed=1)
for i in range(200):
    train_step(model, (x, y), 0.2, step=i)
baseline = evaluate(model, (x, y))
print(f"dense model:  accuracy={baseline['accuracy']:.3f}  "
      f"weights={model.weight_count()}")

prune_magnitude(model, 0.5)
zeros = sum(int((w == 0).sum()) for w in model.weights)
print(f"pruned 50%:   {zeros} of {model.weight_count()} weights zeroed")
after_prune = evaluate(model, (x, y))
print(f"before retrain: accuracy={after_prune['accuracy']:.3f}")

for i in range(200, 260):
    train_step(model, (x, y), 0.2, step=i)
retrained = evaluate(model, (x, y))
zeros_after = sum(int((w == 0).sum()) for w in model.weights)
print(f"after retrain: accuracy={retrained['accuracy']:.3f}  "
      f"(zeros intact: {zeros_after == zeros})")
print("within 0.05 of dense accuracy:",
      retrained["accuracy"] >= baseline["accuracy"] - 0.05)
