"""Service configuration: YAML file plus DIALCTL_* environment overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from ..usersim import SimParams


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8420
    corpus_path: str | None = None  # None: the packaged corpus
    address_book_path: str | None = None  # None: the packaged address book
    checkpoint_path: str | None = None  # load at startup when set
    arch: str = "lstm"
    hidden: int = 32
    seed: int = 0
    mask_epsilon: float = 1e-8
    frontend_dist: str | None = None  # serve static assets when set
    recent_turn_window: int = 500  # uncertainty queue depth
    sim: SimParams = field(default_factory=SimParams)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ServiceConfig":
        cfg = cls()
        if path is not None:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
            sim_raw = raw.pop("sim", None)
            known = {f.name for f in fields(cls)}
            unknown = set(raw) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            cfg = replace(cfg, **raw)
            if sim_raw:
                cfg.sim = SimParams.from_dict(sim_raw)
        return cfg.with_env_overrides()

    def with_env_overrides(self) -> "ServiceConfig":
        cfg = self
        for name, cast in (
            ("host", str),
            ("port", int),
            ("corpus_path", str),
            ("address_book_path", str),
            ("checkpoint_path", str),
            ("arch", str),
            ("hidden", int),
            ("seed", int),
            ("frontend_dist", str),
        ):
            value = os.environ.get(f"DIALCTL_{name.upper()}")
            if value is not None:
                cfg = replace(cfg, **{name: cast(value)})
        sim_overrides = {}
        for name in SimParams().as_dict():
            value = os.environ.get(f"DIALCTL_SIM_{name.upper()}")
            if value is not None:
                sim_overrides[name] = float(value)
        if sim_overrides:
            cfg = replace(cfg, sim=replace(cfg.sim, **sim_overrides))
        return cfg
