"""Folder/object blob store backed by files on disk.

Objects are immutable once written and folders list their objects in
insertion order. URLs take the form storage://{folder}/{name}.
"""

from __future__ import annotations

import re
import threading
from pathlib import Path

MAX_OBJECT_BYTES = 10 * 1024 * 1024
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._ -]{0,127}$")


class StorageError(Exception):
    pass


class NotFoundError(StorageError):
    pass


class ConflictError(StorageError):
    pass


class TooLargeError(StorageError):
    pass


class BadNameError(StorageError):
    pass


def _check_name(kind: str, value: str) -> str:
    if not isinstance(value, str) or not _NAME_RE.match(value) or ".." in value:
        raise BadNameError(f"invalid {kind} {value!r}")
    return value


def object_url(folder: str, name: str) -> str:
    return f"storage://{folder}/{name}"


def parse_url(url: str) -> tuple[str, str]:
    if not isinstance(url, str) or not url.startswith("storage://"):
        raise NotFoundError(f"not a storage url: {url!r}")
    rest = url[len("storage://") :]
    folder, sep, name = rest.partition("/")
    if not sep or not folder or not name:
        raise NotFoundError(f"malformed storage url: {url!r}")
    return folder, name


class StorageStore:
    def __init__(self, root: Path):
        self._root = Path(root)
        self._root.mkdir(parents=True, exist_ok=True)
        self._folders: dict[str, list[str]] = {}  # folder -> names, insertion order
        self._content_types: dict[tuple[str, str], str] = {}
        self._lock = threading.Lock()

    def put(self, folder: str, name: str, data: bytes, content_type: str) -> str:
        _check_name("folder", folder)
        _check_name("object name", name)
        if not isinstance(data, (bytes, bytearray)):
            raise StorageError("object data must be bytes")
        if len(data) > MAX_OBJECT_BYTES:
            raise TooLargeError(
                f"object is {len(data)} bytes, limit is {MAX_OBJECT_BYTES}"
            )
        with self._lock:
            names = self._folders.setdefault(folder, [])
            if name in names:
                raise ConflictError(f"object {folder}/{name} already exists")
            folder_dir = self._root / folder
            folder_dir.mkdir(parents=True, exist_ok=True)
            (folder_dir / name).write_bytes(bytes(data))
            names.append(name)
            self._content_types[(folder, name)] = content_type or "application/octet-stream"
        return object_url(folder, name)

    def restore(self, folder: str, name: str, content_type: str) -> None:
        """Re-index an object from persisted state if its file survives."""
        if not (self._root / folder / name).exists():
            return
        names = self._folders.setdefault(folder, [])
        if name not in names:
            names.append(name)
        self._content_types[(folder, name)] = content_type

    def get(self, folder: str, name: str) -> tuple[bytes, str]:
        with self._lock:
            if name not in self._folders.get(folder, ()):
                raise NotFoundError(f"no object {folder}/{name}")
            content_type = self._content_types[(folder, name)]
        return (self._root / folder / name).read_bytes(), content_type

    def get_url(self, url: str) -> tuple[bytes, str]:
        folder, name = parse_url(url)
        return self.get(folder, name)

    def exists(self, url: str) -> bool:
        try:
            folder, name = parse_url(url)
        except NotFoundError:
            return False
        with self._lock:
            return name in self._folders.get(folder, ())

    def list_folder(self, folder: str) -> list[str]:
        with self._lock:
            if folder not in self._folders:
                raise NotFoundError(f"no folder {folder!r}")
            return list(self._folders[folder])

    def folders(self) -> list[str]:
        with self._lock:
            return list(self._folders)

    def index(self) -> list[tuple[str, str, str]]:
        """(folder, name, content_type) triples in insertion order."""
        with self._lock:
            return [
                (folder, name, self._content_types[(folder, name)])
                for folder, names in self._folders.items()
                for name in names
            ]
