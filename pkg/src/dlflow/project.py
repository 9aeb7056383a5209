"""Project configuration: actors with their single role, submission gates,
and the deterministic-mode flag. Identity is asserted, not authenticated."""

from pathlib import Path

from ._util import read_json, write_json
from .errors import InvalidConfig, NotFound

ROLES = (
    "data-engineer",
    "data-labeler",
    "data-scientist",
    "model-validator",
    "devops-engineer",
    "software-engineer",
)

DEFAULT_ACTORS = {
    "ada": "data-engineer",
    "lou": "data-labeler",
    "sam": "data-scientist",
    "val": "model-validator",
    "dev": "devops-engineer",
    "eng": "software-engineer",
}

DEFAULT_GATE = {"metric": "test_accuracy", "threshold": 0.7}


class ProjectConfig:
    def __init__(self, root: Path):
        self.root = Path(root)
        self._path = self.root / "project.json"
        if self._path.exists():
            doc = read_json(self._path)
        else:
            doc = {}
        self.project = doc.get("project", "default")
        self.deterministic = bool(doc.get("deterministic", False))
        self.actors: dict[str, str] = dict(doc.get("actors", DEFAULT_ACTORS))
        self.gates: dict[str, dict] = dict(doc.get("gates", {}))
        for actor, role in self.actors.items():
            if role not in ROLES:
                raise InvalidConfig(f"actor {actor!r} has unknown role {role!r}")

    def save(self) -> None:
        write_json(
            self._path,
            {
                "project": self.project,
                "deterministic": self.deterministic,
                "actors": self.actors,
                "gates": self.gates,
            },
        )

    def role(self, actor: str) -> str:
        if actor not in self.actors:
            raise NotFound(f"actor {actor!r} is not in the project config")
        return self.actors[actor]

    def gate_for(self, model_name: str) -> dict:
        return self.gates.get(model_name, self.gates.get("default", DEFAULT_GATE))
