"""The learner contract every trainable entry point implements, plus the
registry that experiment configs reference by learner id."""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

from .errors import NotFound


@dataclass(frozen=True)
class DataSource:
    """Pinned, read-only view of one labeled dataset split."""

    repo: str
    ref: str
    commit: str
    split: str
    seed: int
    reader: Callable[[str], bytes]
    tree_digest: str = ""

    def read(self, path: str) -> bytes:
        return self.reader(path)


class TrialContract(ABC):
    """Lifecycle every learner implements: initialization, data loading,
    training, evaluation, and checkpoint save/restore.

    ``restore(save())`` followed by ``evaluate()`` must reproduce the
    pre-save validation metrics exactly.
    """

    @abstractmethod
    def init(self, hparams: dict, seed: int) -> None: ...

    @abstractmethod
    def load_data(self, data_source: DataSource, labels: list[tuple[str, str]]) -> None: ...

    @abstractmethod
    def train(self, budget: int) -> dict[str, float]:
        """Run `budget` training steps; returns training metrics."""

    @abstractmethod
    def evaluate(self) -> dict[str, float]:
        """Validation metrics, deterministic (no dropout)."""

    @abstractmethod
    def save(self) -> dict[str, bytes]:
        """Serialized artifacts (weights, preprocessing state, ...)."""

    @abstractmethod
    def restore(self, artifacts: dict[str, bytes]) -> None: ...


_LEARNERS: dict[str, Callable[[], TrialContract]] = {}


def register_learner(learner_id: str, factory: Callable[[], TrialContract]) -> None:
    _LEARNERS[learner_id] = factory


def get_learner(learner_id: str) -> Callable[[], TrialContract]:
    if learner_id not in _LEARNERS:
        raise NotFound(f"learner {learner_id!r} is not registered")
    return _LEARNERS[learner_id]


def registered_learners() -> list[str]:
    return sorted(_LEARNERS)
