"""Exception taxonomy. Every error carries a stable kebab-case code used by
the CLI and HTTP layers."""


class DlflowError(Exception):
    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# -- versioned data store --

class DuplicateName(DlflowError):
    code = "duplicate-name"


class InvalidName(DlflowError):
    code = "invalid-name"


class NotFound(DlflowError):
    code = "not-found"


class PathEscape(DlflowError):
    code = "path-escape"


# -- pipeline engine --

class UnknownTransform(DlflowError):
    code = "unknown-transform"


class MissingInputRepo(DlflowError):
    code = "missing-input-repo"


class TransformFailure(DlflowError):
    code = "transform-failure"


class InvalidFraction(DlflowError):
    code = "invalid-fraction"


# -- label store --

class DanglingPath(DlflowError):
    code = "dangling-path"


class MalformedRow(DlflowError):
    code = "malformed-row"


# -- experiment tracker --

class InvalidConfig(DlflowError):
    code = "invalid-config"


class NonMonotonicStep(DlflowError):
    code = "non-monotonic-step"


class NoCompletedTrials(DlflowError):
    code = "no-completed-trials"


class DataNotFound(DlflowError):
    code = "data-not-found"


class LearnerError(DlflowError):
    code = "learner-error"


# -- model registry --

class PermissionDenied(DlflowError):
    code = "permission-denied"


class WrongStage(DlflowError):
    code = "wrong-stage"


class GateFailed(DlflowError):
    code = "gate-failed"


class MissingTestMetrics(DlflowError):
    code = "missing-test-metrics"


class MissingCheckpoint(DlflowError):
    code = "missing-checkpoint"


class SelfReviewDenied(DlflowError):
    code = "self-review-denied"


# -- serving gateway --

class MissingArtifact(DlflowError):
    code = "missing-artifact"


class NoProductionVersion(DlflowError):
    code = "no-production-version"


class EndpointConflict(DlflowError):
    code = "endpoint-conflict"


class MalformedPayload(DlflowError):
    code = "malformed-payload"


# -- learners --

class ShapeMismatch(DlflowError):
    code = "shape-mismatch"


class NonFiniteLoss(DlflowError):
    code = "non-finite-loss"


class EmptyDataset(DlflowError):
    code = "empty-dataset"


# -- workflow --

class IllegalTransition(DlflowError):
    code = "illegal-transition"
