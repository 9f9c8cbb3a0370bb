from __future__ import annotations

from typing import TYPE_CHECKING, Any, Callable

if TYPE_CHECKING:
    from .mesh import TriMesh

# Define types for mesh readers and writers
ReaderFnc = Callable[..., "TriMesh"]
WriterFnc = Callable[["TriMesh", Any], None]

# Registry for mesh readers (extension -> function)
READERS: dict[str, ReaderFnc] = {}

# Registry for mesh writers (extension -> function)
WRITERS: dict[str, WriterFnc] = {}


def register_reader(extension: str | list[str]):
    def decorator(fnc: ReaderFnc):
        exts = [extension] if isinstance(extension, str) else extension
        for ext in exts:
            READERS[ext.lower()] = fnc
        return fnc

    return decorator


def register_writer(extension: str | list[str]):
    def decorator(fnc: WriterFnc):
        exts = [extension] if isinstance(extension, str) else extension
        for ext in exts:
            WRITERS[ext.lower()] = fnc
        return fnc

    return decorator
