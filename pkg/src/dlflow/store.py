"""Content-addressed object store with repos, branches, and commits.

Objects (blobs and serialized trees) live under ``objects/<2-hex>/<62-hex>``,
keyed by the SHA-256 of their content, so identical bytes are stored once.
Each repo keeps an append-only ``commits.jsonl`` and ``refs.jsonl``; the
current head of a branch is the last ref record for it. Branch writers are
serialized through a per-(repo, branch) file lock; readers never lock.
"""

import os
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from ._util import append_record, digest_of, flocked, read_records, sha256_hex
from .errors import DuplicateName, InvalidName, NotFound, PathEscape

REPO_NAME_RE = re.compile(r"^[a-z0-9-]+$")
INTERNAL_NAME_RE = re.compile(r"^_[a-z0-9-]+$")
DEFAULT_BRANCH = "master"


def validate_path(path: str) -> str:
    """Repo-relative file path: `/`-separated, no `..`, no empty segments."""
    if not path or path.startswith("/") or "\n" in path:
        raise PathEscape(f"invalid path: {path!r}")
    for seg in path.split("/"):
        if seg in ("", ".", ".."):
            raise PathEscape(f"invalid path segment in {path!r}")
    return path


@dataclass(frozen=True)
class Commit:
    id: str
    repo: str
    branch: str
    parent: Optional[str]
    tree: str
    author: str
    message: str
    timestamp: int

    @staticmethod
    def compute_id(repo, branch, parent, tree, author, message, timestamp) -> str:
        return digest_of(
            {
                "repo": repo,
                "branch": branch,
                "parent": parent,
                "tree": tree,
                "author": author,
                "message": message,
                "timestamp": timestamp,
            }
        )

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "repo": self.repo,
            "branch": self.branch,
            "parent": self.parent,
            "tree": self.tree,
            "author": self.author,
            "message": self.message,
            "timestamp": self.timestamp,
        }

    @staticmethod
    def from_record(rec: dict) -> "Commit":
        return Commit(
            id=rec["id"],
            repo=rec["repo"],
            branch=rec["branch"],
            parent=rec["parent"],
            tree=rec["tree"],
            author=rec["author"],
            message=rec["message"],
            timestamp=rec["timestamp"],
        )


class ObjectStore:
    """Flat content-addressed blob storage with fan-out directories."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def _path(self, oid: str) -> Path:
        return self.root / oid[:2] / oid[2:]

    def put(self, content: bytes) -> str:
        oid = sha256_hex(content)
        path = self._path(oid)
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            # unique temp name: concurrent writers of identical content race
            tmp = path.parent / f".{oid[2:]}.{os.getpid()}.{threading.get_ident()}.tmp"
            tmp.write_bytes(content)
            tmp.rename(path)  # atomic; last writer wins with identical bytes
        return oid

    def get(self, oid: str) -> bytes:
        path = self._path(oid)
        if not path.exists():
            raise NotFound(f"object {oid} not found")
        return path.read_bytes()

    def exists(self, oid: str) -> bool:
        return self._path(oid).exists()


def serialize_tree(entries: dict[str, str]) -> bytes:
    """Canonical tree format: one `<blob-id> <path>` line per entry, paths
    sorted by byte value."""
    lines = []
    for path in sorted(entries, key=lambda p: p.encode("utf-8")):
        lines.append(f"{entries[path]} {path}\n")
    return "".join(lines).encode("utf-8")


def parse_tree(raw: bytes) -> dict[str, str]:
    entries = {}
    for line in raw.decode("utf-8").splitlines():
        blob_id, _, path = line.partition(" ")
        entries[path] = blob_id
    return entries


class DataStore:
    """Repos, branches, and commits over the object store."""

    def __init__(self, root: Path, objects: ObjectStore, clock):
        self.root = Path(root)
        self.objects = objects
        self.clock = clock
        self._observers: list[Callable[[Commit], None]] = []

    # -- wiring --

    def on_commit(self, callback: Callable[[Commit], None]) -> None:
        """Register an observer invoked after every successful commit."""
        self._observers.append(callback)

    # -- paths --

    def _repo_dir(self, name: str) -> Path:
        return self.root / "repos" / name

    def _branch_lock(self, repo: str, branch: str) -> Path:
        return self.root / "locks" / f"repo-{repo}@{branch}.lock"

    # -- repos --

    def create_repo(self, name: str, *, internal: bool = False) -> dict:
        pattern = INTERNAL_NAME_RE if internal else REPO_NAME_RE
        if not pattern.match(name):
            raise InvalidName(f"repo name {name!r} must match {pattern.pattern}")
        repo_dir = self._repo_dir(name)
        with flocked(self.root / "locks" / "repos.lock"):
            if repo_dir.exists():
                raise DuplicateName(f"repo {name!r} already exists")
            repo_dir.mkdir(parents=True)
            append_record(repo_dir / "refs.jsonl", {"branch": DEFAULT_BRANCH, "head": None})
        return {"name": name, "branches": {DEFAULT_BRANCH: None}}

    def repo_exists(self, name: str) -> bool:
        return self._repo_dir(name).exists()

    def ensure_repo(self, name: str, *, internal: bool = False) -> None:
        if not self.repo_exists(name):
            self.create_repo(name, internal=internal)

    def list_repos(self) -> list[str]:
        repos_dir = self.root / "repos"
        if not repos_dir.exists():
            return []
        return sorted(p.name for p in repos_dir.iterdir() if p.is_dir())

    def branches(self, repo: str) -> dict[str, Optional[str]]:
        if not self.repo_exists(repo):
            raise NotFound(f"repo {repo!r} not found")
        heads: dict[str, Optional[str]] = {}
        for rec in read_records(self._repo_dir(repo) / "refs.jsonl"):
            heads[rec["branch"]] = rec["head"]
        return heads

    def head(self, repo: str, branch: str) -> Optional[str]:
        return self.branches(repo).get(branch)

    # -- commits --

    def _commits(self, repo: str) -> dict[str, Commit]:
        recs = read_records(self._repo_dir(repo) / "commits.jsonl")
        return {rec["id"]: Commit.from_record(rec) for rec in recs}

    def get_commit(self, repo: str, commit_id: str) -> Commit:
        commits = self._commits(repo)
        if commit_id in commits:
            return commits[commit_id]
        # allow unambiguous prefixes (CLI convenience)
        if len(commit_id) >= 6:
            matches = [c for cid, c in commits.items() if cid.startswith(commit_id)]
            if len(matches) == 1:
                return matches[0]
        raise NotFound(f"commit {commit_id!r} not found in repo {repo!r}")

    def resolve_ref(self, repo: str, ref: str) -> Commit:
        """Resolve a branch name or commit id (or unique prefix) to a commit."""
        if not self.repo_exists(repo):
            raise NotFound(f"repo {repo!r} not found")
        heads = self.branches(repo)
        if ref in heads:
            head = heads[ref]
            if head is None:
                raise NotFound(f"branch {ref!r} of {repo!r} has no commits")
            return self.get_commit(repo, head)
        return self.get_commit(repo, ref)

    def commit_files(
        self,
        repo: str,
        branch: str,
        files: dict[str, bytes],
        author: str,
        message: str,
        timestamp: Optional[int] = None,
    ) -> Commit:
        """Store all blobs, advance the branch head by one commit.

        The branch is created on first commit. Identical field tuples yield
        identical commit ids (content addressing).
        """
        if not self.repo_exists(repo):
            raise NotFound(f"repo {repo!r} not found")
        entries = {}
        for path, content in files.items():
            validate_path(path)
            entries[path] = self.objects.put(content)
        tree_id = self.objects.put(serialize_tree(entries))
        if timestamp is None:
            timestamp = self.clock.now()

        with flocked(self._branch_lock(repo, branch)):
            parent = self.branches(repo).get(branch)
            cid = Commit.compute_id(repo, branch, parent, tree_id, author, message, timestamp)
            commit = Commit(cid, repo, branch, parent, tree_id, author, message, timestamp)
            repo_dir = self._repo_dir(repo)
            # appends share files across branches of the repo
            with flocked(self.root / "locks" / f"repo-{repo}.lock"):
                append_record(repo_dir / "commits.jsonl", commit.to_record())
                append_record(repo_dir / "refs.jsonl", {"branch": branch, "head": cid})

        for callback in self._observers:
            callback(commit)
        return commit

    # -- reading --

    def read_tree(self, repo: str, ref: str) -> dict[str, str]:
        """Map path -> blob id for the tree at ref."""
        commit = self.resolve_ref(repo, ref)
        return parse_tree(self.objects.get(commit.tree))

    def read_file(self, repo: str, ref: str, path: str) -> bytes:
        tree = self.read_tree(repo, ref)
        if path not in tree:
            raise NotFound(f"path {path!r} not in {repo}@{ref}")
        return self.objects.get(tree[path])

    def read_all_files(self, repo: str, ref: str) -> dict[str, bytes]:
        tree = self.read_tree(repo, ref)
        return {path: self.objects.get(oid) for path, oid in tree.items()}

    def diff(self, repo: str, from_id: str, to_id: str) -> set[tuple[str, str]]:
        """Path-level difference, as (path, added|removed|modified) pairs."""
        tree_a = parse_tree(self.objects.get(self.get_commit(repo, from_id).tree))
        tree_b = parse_tree(self.objects.get(self.get_commit(repo, to_id).tree))
        out = set()
        for path in tree_b.keys() - tree_a.keys():
            out.add((path, "added"))
        for path in tree_a.keys() - tree_b.keys():
            out.add((path, "removed"))
        for path in tree_a.keys() & tree_b.keys():
            if tree_a[path] != tree_b[path]:
                out.add((path, "modified"))
        return out

    def walk_parents(self, repo: str, commit_id: str) -> list[Commit]:
        """Chain from the given commit back to its root."""
        commits = self._commits(repo)
        chain = []
        seen = set()
        current: Optional[str] = commit_id
        while current is not None:
            if current in seen:
                raise DlflowCycleError(f"parent cycle at {current}")
            seen.add(current)
            if current not in commits:
                raise NotFound(f"commit {current!r} not found in repo {repo!r}")
            commit = commits[current]
            chain.append(commit)
            current = commit.parent
        return chain

    def find_commit(self, commit_id: str) -> Commit:
        """Locate a commit id across all repos."""
        for repo in self.list_repos():
            try:
                return self.get_commit(repo, commit_id)
            except NotFound:
                continue
        raise NotFound(f"commit {commit_id!r} not found in any repo")

    def tree_digest(self, repo: str, ref: str) -> str:
        """The tree object id at ref, recomputable from file contents."""
        return self.resolve_ref(repo, ref).tree

    def recompute_tree_digest(self, repo: str, ref: str) -> str:
        """Re-derive the tree digest from stored file bytes (tamper check)."""
        files = self.read_all_files(repo, ref)
        entries = {path: sha256_hex(content) for path, content in files.items()}
        return sha256_hex(serialize_tree(entries))


class DlflowCycleError(RuntimeError):
    pass
