"""
Serving and scoring capture
===========================

An approved version is packaged with its preprocessing wrapper, deployed
behind an endpoint, and every request — valid or malformed — lands in the
append-only scoring log with the version that answered it.
"""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from conftest import build_served_text_model  # noqa: E402

from dlflow.errors import MalformedPayload  # noqa: E402

ws, info = build_served_text_model(tempfile.mkdtemp() + "/demo")
print("deployments:", [d.deployment_name for d in ws.serving.list_deployments()])

# Predictions return the label, per-class scores, and the serving version.
response = ws.serving.predict("mini-clf", {"data": {"text": "alpha alpha beta"}})
print("label:", response["label"])
print("scores:", {k: round(v, 4) for k, v in response["scores"].items()})
print("served by version:", response["model_version"])

# Identical inputs give identical scores but distinct request ids.
again = ws.serving.predict("mini-clf", {"data": {"text": "alpha alpha beta"}})
print("deterministic scores:", again["scores"] == response["scores"])
print("distinct request ids:", again["request_id"] != response["request_id"])

# Malformed payloads are refused and still recorded.
try:
    ws.serving.predict("mini-clf", {"data": {"image": "not text"}})
except MalformedPayload as exc:
    print("refused:", exc)

records = ws.serving.scoring_records("mini-clf")
print("scoring records:", len(records))
for rec in records[-3:]:
    outcome = rec.get("prediction", {}).get("label", rec.get("error"))
    print(f"  {rec['request_id'][:8]} status={rec['status']} -> {outcome}")
