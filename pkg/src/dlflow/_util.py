"""Shared plumbing: hashing, canonical JSON, append-only record logs, file locks,
and the wall/logical clocks."""

import fcntl
import hashlib
import json
import os
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def canonical_json(obj: Any) -> str:
    """Stable serialization: sorted keys, compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest_of(obj: Any) -> str:
    return sha256_hex(canonical_json(obj).encode("utf-8"))


def keyed_hash_u64(key: int, text: str) -> int:
    """Deterministic 64-bit keyed hash of a string.

    Depends only on (key, text); used for stable per-path routing.
    """
    h = hashlib.blake2b(
        text.encode("utf-8"), key=(key & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little"),
        digest_size=8,
    )
    return int.from_bytes(h.digest(), "big")


@contextmanager
def flocked(lock_path: Path) -> Iterator[None]:
    """Exclusive advisory lock. Each call opens its own descriptor, so the
    lock excludes both other processes and other threads of this process."""
    lock_path.parent.mkdir(parents=True, exist_ok=True)
    fd = os.open(lock_path, os.O_CREAT | os.O_RDWR, 0o644)
    try:
        fcntl.flock(fd, fcntl.LOCK_EX)
        yield
    finally:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)


def append_record(path: Path, record: dict) -> None:
    """Append one JSON record as a line, flushed to disk."""
    path.parent.mkdir(parents=True, exist_ok=True)
    line = canonical_json(record) + "\n"
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(line)
        fh.flush()
        os.fsync(fh.fileno())


def read_records(path: Path) -> list[dict]:
    if not path.exists():
        return []
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_json(path: Path, obj: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path: Path) -> Any:
    return json.loads(path.read_text(encoding="utf-8"))


class WallClock:
    """Real time, whole seconds."""

    deterministic = False

    def now(self) -> int:
        return int(time.time())


class LogicalClock:
    """Deterministic clock: a persisted counter starting at a fixed epoch.

    Every call advances by one second, so timestamp sequences are identical
    across reruns that start from the same (usually empty) root.
    """

    EPOCH = 1_600_000_000
    deterministic = True

    def __init__(self, root: Path):
        self._path = Path(root) / "clock"
        self._lock = Path(root) / "locks" / "clock.lock"

    def now(self) -> int:
        with flocked(self._lock):
            n = 0
            if self._path.exists():
                n = int(self._path.read_text().strip() or 0)
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._path.write_text(str(n + 1))
            return self.EPOCH + n
