"""Run configuration (JSON or YAML) and deterministic data writers.

A config file is a mapping with ``schema_version: 1`` and optional blocks
``bath``, ``spectral``, ``alpha``, ``sim``, ``grid``, ``kubo`` and
``equilibrium`` plus top-level ``seed``, ``out``, ``format``, ``threads`` and
``conventions``.  Keys ``command`` and ``result`` are ignored so that a
command's JSON output can be fed back in as a config.
"""
from __future__ import annotations

import copy
import csv
import json
import math
from pathlib import Path

import numpy as np
import yaml

from . import minkowski as mk
from .errors import ConfigError
from .spectral import BathParams, bath_from_spectral, density_from_config

SCHEMA_VERSION = 1
FORMATS = ("csv", "json", "png")
BLOCKS = ("bath", "spectral", "alpha", "sim", "grid", "kubo", "equilibrium", "conventions")
TOP_LEVEL = ("schema_version", "seed", "out", "format", "threads", "command", "result") + BLOCKS

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 0,
    "out": "reldiff-out",
    "format": list(FORMATS),
    "threads": 1,
    "conventions": {"friction_sign": "flux-zero", "advection": "velocity"},
}


def load_config(path: str | Path | None) -> dict:
    """Read a JSON or YAML config (by extension; YAML also parses JSON)."""
    if path is None:
        return {}
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    data.setdefault("_base_dir", str(path.parent.resolve()))
    return data


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in extra.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve(config: dict, overrides: dict | None = None) -> dict:
    """Defaults < file < overrides; validates the top level."""
    cfg = _merge(DEFAULTS, config)
    cfg = _merge(cfg, {k: v for k, v in (overrides or {}).items() if v is not None})
    base_dir = cfg.pop("_base_dir", None)
    unknown = set(cfg) - set(TOP_LEVEL)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if cfg["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {cfg['schema_version']!r} (expected {SCHEMA_VERSION})")
    fmt = cfg["format"]
    if isinstance(fmt, str):
        fmt = [f.strip() for f in fmt.split(",") if f.strip()]
    bad = [f for f in fmt if f not in FORMATS]
    if bad:
        raise ConfigError(f"unknown output formats {bad}; choose from {FORMATS}")
    cfg["format"] = fmt
    conv = cfg["conventions"]
    if conv.get("friction_sign") not in ("flux-zero", "paper-eq56"):
        raise ConfigError("conventions.friction_sign must be flux-zero or paper-eq56")
    if conv.get("advection") not in ("velocity", "momentum"):
        raise ConfigError("conventions.advection must be velocity or momentum")
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a non-negative integer")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        raise ConfigError("threads must be a positive integer")
    cfg.pop("command", None)
    cfg.pop("result", None)
    if base_dir is not None:
        cfg["_base_dir"] = base_dir
    return cfg


def config_vector(value, name: str) -> np.ndarray:
    """A single four-vector from config data."""
    try:
        v = mk.four_vector(value)
    except (TypeError, ValueError):
        v = None
    if v is None or v.shape != (4,):
        raise ConfigError(f"{name} must be a list of four numbers")
    return v


def frame_vector(block: dict) -> np.ndarray:
    """``w`` from ``{"w": [...]}`` or ``{"rapidity": y, "direction": [...]}``; rest by default."""
    if "w" in block:
        return config_vector(block["w"], "w")
    y = float(block.get("rapidity", 0.0))
    if y == 0.0:
        return np.array([1.0, 0.0, 0.0, 0.0])
    return mk.unit_timelike(y, block.get("direction", [0.0, 0.0, 1.0]))


def make_density(cfg: dict):
    """Spectral density; its rest frame defaults to the bath frame."""
    spec = cfg.get("spectral")
    if spec is None:
        return None
    spec = dict(spec)
    spec.setdefault("frame", frame_vector(cfg.get("bath", {})).tolist())
    base = cfg.get("_base_dir")
    return density_from_config(spec, Path(base) if base else None)


def make_bath(cfg: dict) -> BathParams:
    """Explicit scalars from ``bath`` or quadrature of the ``spectral`` block."""
    block = dict(cfg.get("bath", {}))
    sign = cfg["conventions"]["friction_sign"]
    w = frame_vector(block)
    tau_c = float(block.get("tau_c", 1.0))
    beta = block.get("beta", (cfg.get("spectral") or {}).get("beta", 1.0))
    if "eps" in block:
        return BathParams(beta=float(beta), eps=float(block["eps"]), pi_eps=float(block.get("pi_eps", 0.0)),
                          lam=block.get("lam"), tau_c=tau_c, w=w, friction_sign=sign)
    G = make_density(cfg)
    if G is None:
        raise ConfigError("need either bath.eps/pi_eps or a spectral block")
    bath = bath_from_spectral(G, float(beta), w, tau_c=tau_c, friction_sign=sign)
    if block.get("lam") is not None:
        bath = bath.with_(lam=float(block["lam"]))
    return bath


def public_config(cfg: dict) -> dict:
    return {k: v for k, v in cfg.items() if not k.startswith("_")}


# ---------------------------------------------------------------------------
# writers


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, data: dict) -> Path:
    path.write_text(json.dumps(_clean(data), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(path: Path, header: list[str], rows) -> Path:
    """Rows of numbers in shortest round-trip form."""
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    if isinstance(v, str):
        return v
    return repr(float(v))


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)
