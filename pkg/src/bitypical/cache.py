"""On-disk cache of central projector sets.

Files hold the binary SWTP format from ``projectors.serialize_projectors``.
Writes go to a temporary file in the cache directory followed by an atomic
rename. A damaged or mismatched file is a cache miss with a warning, unless
the caller asks for strict loading.
"""
from __future__ import annotations

import logging
import os
import struct
import tempfile
import warnings
from pathlib import Path

from .projectors import (
    CentralProjector,
    SerializationError,
    central_projectors,
    deserialize_projectors,
    register_projectors,
    serialize_projectors,
    tensor_space_dims,
)
from .tensorspace import ActionKind, TensorSpace

ENV_VAR = "SWTP_CACHE_DIR"

log = logging.getLogger(__name__)


class CacheWarning(UserWarning):
    pass


def default_cache_dir() -> Path | None:
    value = os.environ.get(ENV_VAR)
    return Path(value) if value else None


def cache_path(cache_dir: str | os.PathLike, kind: ActionKind | str, dims: tuple[int, int], n: int) -> Path:
    kind = ActionKind(kind)
    return Path(cache_dir) / f"{kind.value}_{dims[0]}_{dims[1]}_{n}.swtp"


def cache_store(
    cache_dir: str | os.PathLike,
    kind: ActionKind | str,
    dims: tuple[int, int],
    n: int,
    projs: list[CentralProjector],
) -> Path:
    kind = ActionKind(kind)
    target = cache_path(cache_dir, kind, dims, n)
    target.parent.mkdir(parents=True, exist_ok=True)
    blob = serialize_projectors(kind, dims[0], dims[1], n, projs)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=target.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.chmod(tmp, 0o644)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return target


def cache_load(
    cache_dir: str | os.PathLike,
    kind: ActionKind | str,
    dims: tuple[int, int],
    n: int,
    *,
    strict: bool = False,
) -> list[CentralProjector] | None:
    """Projector set for (kind, dims, n), or None on a miss.

    With ``strict``, an unreadable file raises SerializationError instead of
    being treated as a miss.
    """
    kind = ActionKind(kind)
    path = cache_path(cache_dir, kind, dims, n)
    if not path.exists():
        return None
    try:
        key, projs = deserialize_projectors(path.read_bytes())
        if key != (kind, dims[0], dims[1], n):
            raise SerializationError(f"cache key {key} does not match requested {(kind, dims, n)}")
    except (SerializationError, ValueError, KeyError, struct.error) as err:
        if strict:
            raise SerializationError(f"{path}: {err}") from err
        warnings.warn(f"ignoring cache file {path}: {err}", CacheWarning, stacklevel=2)
        return None
    return projs


def load_or_build(
    space: TensorSpace,
    kind: ActionKind | str,
    cache_dir: str | os.PathLike | None,
    *,
    strict: bool = False,
) -> dict:
    """Fill the projector registry for ``kind`` from the cache, building and storing on a miss."""
    kind = ActionKind(kind)
    if cache_dir is None:
        return central_projectors(space, kind)
    dims = tensor_space_dims(kind, space)
    projs = cache_load(cache_dir, kind, dims, space.n, strict=strict)
    if projs is not None:
        log.debug("cache hit for %s %s n=%d", kind.value, dims, space.n)
        register_projectors(space, kind, projs)
        return central_projectors(space, kind)
    built = central_projectors(space, kind)
    cache_store(cache_dir, kind, dims, space.n, list(built.values()))
    return built
