"""Ground-truth labels keyed to versioned files.

Each record pins (split, repo, commit, path) -> label; re-labeling the same
key overwrites. Labels are pinned to the exact commit, so later branch moves
never change what an experiment trained on.
"""

import json
from dataclasses import dataclass
from pathlib import Path

from ._util import append_record, flocked, read_records
from .errors import DanglingPath, MalformedRow, NotFound
from .store import DataStore

SPLITS = ("train", "test")


@dataclass(frozen=True)
class LabelRecord:
    split: str
    repo: str
    commit: str
    path: str
    label: str
    labeler: str
    labeled_at: int
    dataset_version: str


class LabelStore:
    def __init__(self, root: Path, data: DataStore, clock):
        self.root = Path(root)
        self.data = data
        self.clock = clock

    @property
    def _records_path(self) -> Path:
        return self.root / "labels" / "records.jsonl"

    def _append(self, records: list[LabelRecord]) -> None:
        with flocked(self.root / "locks" / "labels.lock"):
            for rec in records:
                append_record(self._records_path, rec.__dict__)

    def _state(self) -> dict[tuple, LabelRecord]:
        state = {}
        for raw in read_records(self._records_path):
            rec = LabelRecord(**raw)
            state[(rec.split, rec.repo, rec.commit, rec.path)] = rec
        return state

    def import_labels(self, repo: str, ref: str, label_file_path: str, split: str) -> int:
        """Load a line-delimited label file stored at `ref` in the repo.

        Every row must reference a path present in the same commit's tree;
        one dangling path rejects the whole import.
        """
        if split not in SPLITS:
            raise MalformedRow(f"split must be one of {SPLITS}, got {split!r}")
        commit = self.data.resolve_ref(repo, ref)
        tree = self.data.read_tree(repo, commit.id)
        if label_file_path not in tree:
            raise NotFound(f"label file {label_file_path!r} not at {repo}@{ref}")
        raw = self.data.read_file(repo, commit.id, label_file_path)

        rows = []
        for line_no, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                path, label = row["path"], row["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise MalformedRow(f"line {line_no}: {exc}") from exc
            if not label:
                raise MalformedRow(f"line {line_no}: empty label")
            if path not in tree:
                raise DanglingPath(
                    f"line {line_no}: {path!r} not present at {repo}@{commit.id[:12]}"
                )
            rows.append((path, label, row.get("labeler", "unknown"), row.get("labeled_at")))

        now = self.clock.now()
        records = [
            LabelRecord(
                split=split,
                repo=repo,
                commit=commit.id,
                path=path,
                label=label,
                labeler=labeler,
                labeled_at=labeled_at if labeled_at is not None else now,
                dataset_version=f"{ref}@{commit.id}",
            )
            for path, label, labeler, labeled_at in rows
        ]
        self._append(records)
        return len(records)

    def auto_label(
        self, repo: str, ref: str, split: str, labeler: str = "auto", under: str = ""
    ) -> int:
        """Derive labels from the `<category>/<file>` path convention.

        With `under` set (e.g. "train/"), only paths beneath that prefix are
        labeled and the category is the segment after it.
        """
        if split not in SPLITS:
            raise MalformedRow(f"split must be one of {SPLITS}, got {split!r}")
        commit = self.data.resolve_ref(repo, ref)
        tree = self.data.read_tree(repo, commit.id)
        now = self.clock.now()
        records = []
        for path in sorted(tree):
            if under and not path.startswith(under):
                continue
            rest = path[len(under):]
            if "/" not in rest:
                continue
            category = rest.split("/", 1)[0]
            records.append(
                LabelRecord(
                    split=split,
                    repo=repo,
                    commit=commit.id,
                    path=path,
                    label=category,
                    labeler=labeler,
                    labeled_at=now,
                    dataset_version=f"{ref}@{commit.id}",
                )
            )
        self._append(records)
        return len(records)

    def query_labels(self, split: str, repo: str, ref: str) -> list[tuple[str, str]]:
        """(path, label) pairs pinned to the resolved commit, sorted by path."""
        commit = self.data.resolve_ref(repo, ref)
        state = self._state()
        out = [
            (rec.path, rec.label)
            for (s, r, c, _p), rec in state.items()
            if s == split and r == repo and c == commit.id
        ]
        return sorted(out)

    def records(self, split: str, repo: str, ref: str) -> list[LabelRecord]:
        commit = self.data.resolve_ref(repo, ref)
        recs = [
            rec
            for (s, r, c, _p), rec in self._state().items()
            if s == split and r == repo and c == commit.id
        ]
        return sorted(recs, key=lambda rec: rec.path)
