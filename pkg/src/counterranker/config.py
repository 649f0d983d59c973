"""Run configuration: one JSON file, strict key validation, flag overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any

from .corpus import Setting
from .ltr import GbdtConfig, LogregConfig
from .neural import TrainConfig
from .synthetic import SyntheticSpec


class ConfigError(ValueError):
    """Unknown keys, bad values, or unresolvable paths in a run config."""


@dataclass(frozen=True)
class PathsConfig:
    corpus: str | None = None
    store: str | None = None
    checkpoint: str | None = None
    cache: str | None = None
    features: str | None = None
    standardizer: str | None = None
    report: str | None = None
    loss_trace: str | None = None


@dataclass(frozen=True)
class SimpleSdConfig:
    alpha: tuple[float, ...] | None = None  # 20 reals; None = published defaults

    def __post_init__(self) -> None:
        if self.alpha is not None:
            if len(self.alpha) != 20:
                raise ValueError("simplesd.alpha must hold exactly 20 numbers")
            object.__setattr__(self, "alpha", tuple(float(a) for a in self.alpha))


@dataclass(frozen=True)
class RunConfig:
    paths: PathsConfig = PathsConfig()
    setting: Setting = Setting.epa
    split: str = "test"  # which partition evaluation/index commands use
    ks: tuple[int, ...] = (10,)
    seed: int = 0
    n_neg: int = 5
    simplesd: SimpleSdConfig = SimpleSdConfig()
    logreg: LogregConfig = LogregConfig()
    gbdt: GbdtConfig = GbdtConfig()
    neural: TrainConfig = TrainConfig()
    synthetic: SyntheticSpec = SyntheticSpec()


def _build_section(cls, obj: dict, where: str, coerce: dict[str, Any] | None = None):
    known = {f.name for f in fields(cls)}
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = dict(obj)
    if coerce:
        for key, fn in coerce.items():
            if key in kwargs:
                kwargs[key] = fn(kwargs[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {where}: {exc}") from exc


_TOP_KEYS = {
    "paths",
    "setting",
    "split",
    "ks",
    "seed",
    "n_neg",
    "simplesd",
    "logreg",
    "gbdt",
    "neural",
    "synthetic",
}


def config_from_dict(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(obj) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    paths = _build_section(PathsConfig, obj.get("paths", {}), "paths")
    simplesd = _build_section(
        SimpleSdConfig, obj.get("simplesd", {}), "simplesd", coerce={"alpha": tuple}
    )
    logreg = _build_section(LogregConfig, obj.get("logreg", {}), "logreg")
    gbdt = _build_section(GbdtConfig, obj.get("gbdt", {}), "gbdt")
    neural = _build_section(
        TrainConfig, obj.get("neural", {}), "neural", coerce={"setting": Setting}
    )
    synthetic = _build_section(SyntheticSpec, obj.get("synthetic", {}), "synthetic")
    try:
        setting = Setting(obj.get("setting", "epa"))
    except ValueError as exc:
        raise ConfigError(f"invalid setting: {obj.get('setting')!r}") from exc
    ks = obj.get("ks", [10])
    if not isinstance(ks, list) or not all(isinstance(k, int) and k >= 1 for k in ks):
        raise ConfigError("ks must be a list of positive integers")
    return RunConfig(
        paths=paths,
        setting=setting,
        split=str(obj.get("split", "test")),
        ks=tuple(ks),
        seed=int(obj.get("seed", 0)),
        n_neg=int(obj.get("n_neg", 5)),
        simplesd=simplesd,
        logreg=logreg,
        gbdt=gbdt,
        neural=neural,
        synthetic=synthetic,
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc.msg}") from exc
    return config_from_dict(obj)


def apply_overrides(
    config: RunConfig,
    setting: str | None = None,
    ks: str | None = None,
    seed: int | None = None,
) -> RunConfig:
    """Command-line flags win over file values."""
    if setting is not None:
        try:
            config = replace(config, setting=Setting(setting))
        except ValueError as exc:
            raise ConfigError(f"invalid setting: {setting!r}") from exc
    if ks is not None:
        try:
            parsed = tuple(int(part) for part in ks.split(",") if part)
        except ValueError as exc:
            raise ConfigError(f"invalid k list: {ks!r}") from exc
        if not parsed or any(k < 1 for k in parsed):
            raise ConfigError(f"invalid k list: {ks!r}")
        config = replace(config, ks=parsed)
    if seed is not None:
        config = replace(
            config,
            seed=seed,
            neural=replace(config.neural, seed=seed),
            logreg=replace(config.logreg, seed=seed),
            gbdt=replace(config.gbdt, seed=seed),
            synthetic=replace(config.synthetic, seed=seed),
        )
    return config


def config_fingerprint(config: RunConfig) -> str:
    def encode(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {f.name: encode(getattr(obj, f.name)) for f in fields(obj)}
        if isinstance(obj, (tuple, list)):
            return [encode(x) for x in obj]
        if isinstance(obj, Setting):
            return obj.value
        return obj

    payload = json.dumps(encode(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()
