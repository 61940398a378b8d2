"""Content-addressed, write-once response cache.

Each entry is one JSON file at ``<root>/<d[0:2]>/<d[2:4]>/<d>.json``. Writers
publish through a temp file and a hard link, so the first writer wins, later
writers are no-ops, and readers never observe a partial file.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Optional

from .errors import IoFailure


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


class ResponseCache:
    def __init__(self, root: str | os.PathLike):
        self.root = Path(root)

    def path_for(self, key: str) -> Path:
        if len(key) < 8 or not all(c in "0123456789abcdef" for c in key):
            raise ValueError(f"cache key must be a hex digest, got {key!r}")
        return self.root / key[:2] / key[2:4] / f"{key}.json"

    def get(self, key: str) -> Optional[dict]:
        path = self.path_for(key)
        try:
            with open(path, encoding="utf-8") as fh:
                return json.load(fh)
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as exc:
            raise IoFailure(f"unreadable cache entry {path}: {exc}") from exc

    def put(self, key: str, value: dict) -> bool:
        """Store ``value`` unless ``key`` exists. Returns True if this call wrote it."""
        path = self.path_for(key)
        if path.exists():
            return False
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=path.parent)
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as fh:
                    fh.write(canonical_json(value))
                    fh.flush()
                    os.fsync(fh.fileno())
                try:
                    os.link(tmp, path)
                except FileExistsError:
                    return False
                except OSError:
                    # filesystems without hard links: rename is still atomic
                    if path.exists():
                        return False
                    os.replace(tmp, path)
                    return True
                return True
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
        except OSError as exc:
            raise IoFailure(f"cannot write cache entry {path}: {exc}") from exc

    def __contains__(self, key: str) -> bool:
        return self.path_for(key).exists()

    def __len__(self) -> int:
        if not self.root.exists():
            return 0
        return sum(1 for _ in self.root.glob("*/*/*.json"))
