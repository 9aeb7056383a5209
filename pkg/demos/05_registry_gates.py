"""
Model registry stage gates
==========================

Versions move registered -> submitted -> approved -> production, each
transition guarded by a role and, for submission, a test-metric threshold.
Rejection is terminal; promotion demotes the previous production version.
"""

import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
from conftest import build_served_text_model  # noqa: E402  (reuses the fixture builder)

from dlflow.errors import GateFailed, PermissionDenied, WrongStage  # noqa: E402

ws, info = build_served_text_model(tempfile.mkdtemp() + "/demo")

# Register a fresh version from the same checkpoint.
mv = ws.models.register_model(
    "gate-demo", info["checkpoint"], info["experiment"], info["raw_commit"], creator="sam"
)
print("registered version", mv.version, "stage:", mv.stage)

# Submission is gated on test accuracy >= 0.7; 0.69 fails, 0.70 passes.
ws.models.attach_test_metrics("gate-demo", mv.version, {"test_accuracy": 0.69})
try:
    ws.models.submit("gate-demo", mv.version, "sam")
except GateFailed as exc:
    print("0.69 rejected:", exc)
ws.models.attach_test_metrics("gate-demo", mv.version, {"test_accuracy": 0.70})
print("0.70 submits:", ws.models.submit("gate-demo", mv.version, "sam").stage)

# Only a model validator may review, and never their own model.
try:
    ws.models.review("gate-demo", mv.version, "approve", "dev")
except PermissionDenied as exc:
    print("devops review denied:", exc)
print("validator approves:", ws.models.review("gate-demo", mv.version, "approve", "val").stage)

# Promotion demotes whatever was in production for the same name.
promoted = ws.models.promote_to_production("gate-demo", mv.version, "dev")
print("promoted:", promoted.stage)
second = ws.models.register_model(
    "gate-demo", info["checkpoint"], info["experiment"], info["raw_commit"], creator="sam"
)
ws.models.attach_test_metrics("gate-demo", second.version, {"test_accuracy": 0.9})
ws.models.submit("gate-demo", second.version, "sam")
ws.models.review("gate-demo", second.version, "approve", "val")
ws.models.promote_to_production("gate-demo", second.version, "val")
print("stages now:", {v.version: v.stage for v in ws.models.get_model("gate-demo")})

# Skipping steps is impossible: the stage graph only has forward edges.
third = ws.models.register_model(
    "gate-demo", info["checkpoint"], info["experiment"], info["raw_commit"], creator="sam"
)
try:
    ws.models.promote_to_production("gate-demo", third.version, "dev")
except WrongStage as exc:
    print("no shortcut to production:", exc)
