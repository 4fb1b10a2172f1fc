"""Persistent, content-addressed catalog of ladder results.

Layout under the catalog directory:

    entries/<key>.json   one file per (params, tolerances) key, records by n
    index.json           key -> params summary and the n values stored
    .lock                advisory lock serializing writers

The key is the SHA-256 of the canonical JSON of params and tolerances, so
changing any tolerance gives a different key. The index is derived data:
if it is unreadable it is rebuilt from the entry files.
"""

from __future__ import annotations

import contextlib
import fcntl
import hashlib
import json
import os
import tempfile
import warnings
from pathlib import Path

from .outputs import jsonable

__all__ = ["Catalog", "CatalogWarning", "catalog_key", "default_catalog_dir", "ENV_VAR"]

ENV_VAR = "PLAPSHOOT_CATALOG"


class CatalogWarning(UserWarning):
    pass


def catalog_key(params: dict, tolerances: dict) -> str:
    blob = json.dumps(jsonable({"params": params, "tolerances": tolerances}),
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def default_catalog_dir(configured: str | None = None) -> Path:
    """Environment variable first, then the configured path, then ./catalog."""
    env = os.environ.get(ENV_VAR)
    return Path(env or configured or "catalog")


def _atomic_write(path: Path, obj) -> None:
    text = json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


class Catalog:
    def __init__(self, root):
        self.root = Path(root)
        self.entries_dir = self.root / "entries"
        self.index_path = self.root / "index.json"
        self.lock_path = self.root / ".lock"
        self.entries_dir.mkdir(parents=True, exist_ok=True)

    @contextlib.contextmanager
    def _locked(self, exclusive=True):
        with open(self.lock_path, "a+") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX if exclusive else fcntl.LOCK_SH)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _entry_path(self, key):
        return self.entries_dir / f"{key}.json"

    def _read_entry(self, key):
        path = self._entry_path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def _index_record(self, entry):
        return dict(params=entry["params"], n=sorted(int(n) for n in entry["records"]))

    def rebuild_index(self) -> dict:
        index = {}
        for path in sorted(self.entries_dir.glob("*.json")):
            try:
                entry = json.loads(path.read_text(encoding="utf-8"))
                index[entry["key"]] = self._index_record(entry)
            except (ValueError, KeyError) as exc:
                warnings.warn(f"skipping unreadable catalog entry {path.name}: {exc}",
                              CatalogWarning, stacklevel=3)
        _atomic_write(self.index_path, index)
        return index

    def _load_index(self) -> dict:
        if not self.index_path.exists():
            return {}
        try:
            index = json.loads(self.index_path.read_text(encoding="utf-8"))
            if not isinstance(index, dict):
                raise ValueError("index is not a mapping")
            return index
        except ValueError as exc:
            warnings.warn(f"catalog index corrupt ({exc}); rebuilding from entries",
                          CatalogWarning, stacklevel=3)
            return self.rebuild_index()

    def index(self) -> dict:
        with self._locked(exclusive=True):
            return self._load_index()

    def store(self, params: dict, tolerances: dict, records: dict) -> str:
        """Merge {n: record} into the entry for (params, tolerances); return the key.

        Each record should carry at least ``a_n``; artifact paths go under
        ``artifacts``.
        """
        key = catalog_key(params, tolerances)
        with self._locked(exclusive=True):
            entry = self._read_entry(key) or dict(key=key, params=params,
                                                  tolerances=tolerances, records={})
            for n, rec in records.items():
                entry["records"][str(int(n))] = rec
            _atomic_write(self._entry_path(key), entry)
            index = self._load_index()
            index[key] = self._index_record(jsonable(entry))
            _atomic_write(self.index_path, index)
        return key

    def query(self, key: str, n: int):
        """Stored record for (key, n), or None."""
        with self._locked(exclusive=False):
            entry = self._read_entry(key)
        if entry is None:
            return None
        return entry["records"].get(str(int(n)))

    def lookup(self, params: dict, tolerances: dict, n: int):
        return self.query(catalog_key(params, tolerances), n)
