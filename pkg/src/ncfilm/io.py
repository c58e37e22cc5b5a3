"""CSV/JSON artifact plumbing shared by the command-line layer.

Every float is written with 17 significant digits so that regression
diffs catch real numerical drift instead of formatting noise, and every
CSV emitted during one invocation is listed in that invocation's
manifest.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .model import ModelParams


def fmt(value) -> str:
    """Render one cell: floats at 17 significant digits, the rest as-is."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if x != x:
            return "nan"
        if x in (float("inf"), float("-inf")):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(value)


def write_csv(path: Path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(
                f"row of width {len(row)} against header of width {len(header)} in {path.name}"
            )
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_json(path: Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, Path):
        return str(obj)
    return obj


@dataclass
class RunManifest:
    """Record of one CLI invocation and the artifacts it produced."""

    command_line: str
    params: dict
    code_version: str = __version__
    inputs: list[str] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)
    wall_time_s: float = 0.0
    events: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


class ArtifactWriter:
    """Collects artifacts for one invocation and writes the manifest.

    Use as a context manager; the manifest lands next to the artifacts
    and references every CSV/JSON written through this instance.
    """

    def __init__(self, out_dir: Path, name: str, command_line: str, params: ModelParams | dict):
        self.out_dir = Path(out_dir)
        self.name = name
        if isinstance(params, ModelParams):
            params = asdict(params)
        self.manifest = RunManifest(command_line=command_line, params=params)
        self._t0 = time.monotonic()

    def path(self, filename: str) -> Path:
        return self.out_dir / filename

    def csv(self, filename: str, header: list[str], rows) -> Path:
        p = write_csv(self.path(filename), header, rows)
        self.manifest.outputs.append(str(p))
        return p

    def json(self, filename: str, payload: dict) -> Path:
        p = write_json(self.path(filename), payload)
        self.manifest.outputs.append(str(p))
        return p

    def note_input(self, path) -> None:
        self.manifest.inputs.append(str(path))

    def event(self, key: str, value) -> None:
        self.manifest.events[key] = _jsonable(value)

    def finish(self) -> Path:
        self.manifest.wall_time_s = time.monotonic() - self._t0
        return write_json(self.path(f"{self.name}.manifest.json"), self.manifest.to_dict())

    def __enter__(self) -> "ArtifactWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.finish()


def load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"config file not found: {p}")
    data = json.loads(p.read_text())
    if not isinstance(data, dict):
        raise ValueError("config file must hold a JSON object")
    return data
