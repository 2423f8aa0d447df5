"""Run configuration and byte-stable CSV/JSON output."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "OUTPUT_ENV",
    "RunConfig",
    "format_value",
    "write_csv",
    "write_json",
    "to_jsonable",
    "read_config_file",
    "parse_range",
    "package_version",
]

OUTPUT_ENV = "LANEEMDEN_OUTPUT_DIR"


def package_version() -> str:
    from . import __version__

    return __version__


def parse_range(text: str, kind=float) -> tuple:
    """``"lo:hi"`` -> ``(lo, hi)``."""
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ConfigurationError(f"expected a range 'lo:hi', got {text!r}")
    try:
        return kind(parts[0]), kind(parts[1])
    except ValueError as exc:
        raise ConfigurationError(f"bad range {text!r}: {exc}") from None


@dataclass
class RunConfig:
    a: float = 1.0
    b: float = 2.0
    N: int = 2
    m: int = 1
    p: float | None = None
    p_range: tuple = (1.01, 40.0)
    n_range: tuple = (1, 6)
    K: int = 2048
    L: int = 16
    boundary_tol: float = 1e-10
    eigen_tol: float = 1e-12
    degeneracy_tol: float = 1e-6
    cone_tol: float = 1e-8
    newton_tol: float = 1e-10
    jmax: int = 20
    samples: int = 16
    branch_K: int = 256
    p_max: float = 40.0
    norm_max: float = 1e30
    max_steps: int = 2000
    stride: int = 10
    output_dir: str = "."
    format: str = "csv"
    jobs: int = 1
    deterministic: bool = True

    def validate(self) -> "RunConfig":
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or not 0 < self.a < self.b:
            raise ConfigurationError(f"annulus needs 0 < a < b, got a={self.a}, b={self.b}")
        if self.N < 2:
            raise ConfigurationError(f"dimension N must be >= 2, got {self.N}")
        if self.m < 1:
            raise ConfigurationError(f"nodal zone count m must be >= 1, got {self.m}")
        if self.p is not None and not self.p > 1:
            raise ConfigurationError(f"exponent p must exceed 1, got {self.p}")
        lo, hi = self.p_range
        if not 1 < lo < hi:
            raise ConfigurationError(f"p range needs 1 < lo < hi, got {lo}:{hi}")
        n0, n1 = self.n_range
        if not 0 <= n0 <= n1:
            raise ConfigurationError(f"n range needs 0 <= lo <= hi, got {n0}:{n1}")
        if not 16 <= self.K <= 1 << 16:
            raise ConfigurationError(f"K must lie in [16, 65536], got {self.K}")
        if not 8 <= self.L <= 512:
            raise ConfigurationError(f"L must lie in [8, 512], got {self.L}")
        for name in ("boundary_tol", "eigen_tol", "degeneracy_tol", "cone_tol", "newton_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive, got {getattr(self, name)}")
        if self.format not in ("csv", "json"):
            raise ConfigurationError(f"format must be csv or json, got {self.format!r}")
        for name in ("jmax", "samples", "branch_K", "max_steps", "stride"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.p_max > 1 or not self.norm_max > 0:
            raise ConfigurationError("p_max must exceed 1 and norm_max must be positive")
        if self.jobs < 1:
            raise ConfigurationError(f"jobs must be >= 1, got {self.jobs}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p_range"] = list(self.p_range)
        d["n_range"] = list(self.n_range)
        return d

    @classmethod
    def coerce(cls, key: str, value: Any):
        """Convert a textual setting to the field's type."""
        types = {f.name: f.type for f in fields(cls)}
        if key not in types:
            raise ConfigurationError(f"unknown setting {key!r}")
        if value is None:
            return None
        t = str(types[key])
        text = str(value).strip()
        try:
            if key in ("p_range",):
                return parse_range(text, float) if isinstance(value, str) else tuple(value)
            if key in ("n_range",):
                return parse_range(text, int) if isinstance(value, str) else tuple(value)
            if t.startswith("bool"):
                return text.lower() in ("1", "true", "yes", "on")
            if t.startswith("int"):
                return int(text)
            if t.startswith("float"):
                return float(text)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {key}: {value!r} ({exc})") from None
        return text


def read_config_file(path: str | os.PathLike) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[key] = RunConfig.coerce(key, value)
    return out


def format_value(x) -> str:
    """Shortest round-trip text for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path: str | os.PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(x) for x in row])
    return path


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path: str | os.PathLike, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(obj), indent=2, ensure_ascii=False, allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")
    return path
