"""Versioned model container: a JSON header line followed by a pickle payload."""

from __future__ import annotations

import json
import pickle
from pathlib import Path

MAGIC = b"TRIPCAST-MODEL"
FORMAT_VERSION = 1


class SchemaMismatchError(ValueError):
    pass


def _jsonable(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        if isinstance(v, (str, int, float, bool)) or v is None:
            out[k] = v
        else:
            out[k] = repr(v)
    return out


def save_model(path, model, schema_id: str, task: str, feature_names=(), extra=None):
    header = {
        "format_version": FORMAT_VERSION,
        "schema_id": schema_id,
        "task": task,
        "estimator": type(model).__name__,
        "params": _jsonable(model.get_params(deep=False)),
        "feature_names": list(feature_names),
        "extra": extra or {},
    }
    payload = pickle.dumps(model, protocol=4)
    with open(path, "wb") as fh:
        fh.write(MAGIC + b" " + str(FORMAT_VERSION).encode() + b"\n")
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh, path)


def _read_header(fh, path):
    magic = fh.readline().rstrip(b"\n").split(b" ")
    if len(magic) != 2 or magic[0] != MAGIC:
        raise SchemaMismatchError(f"{path} is not a model file")
    if int(magic[1]) != FORMAT_VERSION:
        raise SchemaMismatchError(f"{path}: unsupported format version {magic[1].decode()}")
    return json.loads(fh.readline())


def load_model(path, expected_schema=None, expected_task=None):
    """Load a model; raises SchemaMismatchError on a wrong schema or task.

    The payload is a pickle: only load files you produced yourself.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        header = _read_header(fh, path)
        if expected_schema is not None and header["schema_id"] != expected_schema:
            raise SchemaMismatchError(
                f"model schema {header['schema_id']!r} does not match {expected_schema!r}")
        if expected_task is not None and header["task"] != expected_task:
            raise SchemaMismatchError(
                f"model was trained for {header['task']!r}, not {expected_task!r}")
        model = pickle.loads(fh.read())
    return model, header
