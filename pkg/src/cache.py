"""Persistent completion cache."""

import json
import logging
import threading
import time
from pathlib import Path

logger = logging.getLogger(__name__)

CACHE_FILE = "completions.jsonl"


class ResponseCache:
    """Append-only JSON Lines store of completions keyed by request hash.

    Every record is loaded into memory on open; a corrupt line is skipped.
    Without a directory the cache lives in memory only.
    Writes are serialized, reads are lock-free.
    """

    def __init__(self, cache_dir: Path | None = None):
        self.path = None
        if cache_dir is not None:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            self.path = Path(cache_dir) / CACHE_FILE
        self._lock = threading.Lock()
        self._entries: dict[str, dict] = {}
        self._load()

    def _load(self):
        if self.path is None or not self.path.exists():
            return
        with open(self.path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    key = record["key"]
                    record["response"]["text"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    logger.warning("skipping corrupt cache record %s:%d", self.path, lineno)
                    continue
                # First write for a key wins; equal keys never change their text
                self._entries.setdefault(key, record)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> dict | None:
        """The cached response ({"text", "finish_reason"}) for a key."""
        record = self._entries.get(key)
        return record["response"] if record else None

    def put(self, key: str, request: dict, response: dict):
        record = {"key": key, "request": request, "response": response, "timestamp": time.time()}
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = record
            if self.path is None:
                return
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
