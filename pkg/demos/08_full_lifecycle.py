"""
The full lifecycle in one call
==============================

One scripted iteration of the news task: synthesize a corpus, ingest it,
clean and split through triggered pipelines, auto-label, search
hyperparameters with early stopping, train, gate on test accuracy, review,
promote, package, deploy, and answer smoke predictions — then trace the
production model back to the exact raw ingestion commit.

Run `python demos/08_full_lifecycle.py fashion` for the image task.
"""

import sys
import tempfile

from dlflow import run_use_case

which = sys.argv[1] if len(sys.argv) > 1 else "news"
report = run_use_case(which, tempfile.mkdtemp() + "/lifecycle")

print(f"use case: {report['use_case']} (seed {report['seed']})")
print(f"test accuracy: {report['test_accuracy']:.3f}")
print(f"model: {report['model']['name']} v{report['model']['version']}")
print(f"deployment: {report['deployment']['endpoint']} "
      f"serving v{report['deployment']['version']}")

print("smoke predictions:")
for smoke in report["smoke_predictions"]:
    mark = "ok" if smoke["expected"] == smoke["label"] else "MISS"
    print(f"  expected {smoke['expected']:<14} predicted {smoke['label']:<14} {mark}")

print("lineage chain:")
for link in report["trace"]["chain"]:
    extra = f" via spec {link['via_spec'][:12]}" if "via_spec" in link else ""
    print(f"  {link['kind']:<14} {link['id'][:44]}{extra}")
print("dataset digest check:", report["trace"]["dataset_digest"]["match"])
