"""Experiment configuration and the plain-text config file format.

A config file holds one ``key = value`` pair per line; blank lines and
lines starting with ``#`` are ignored.  Keys are the field names of
:class:`ExperimentConfig`, and unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass
from pathlib import Path

from forestlab.dgp import CovariateLaw, LawKind, RegressionKind
from forestlab.errors import InputError

#: Environment variable overriding the worker count.
WORKERS_ENV = "FORESTLAB_WORKERS"

OUTPUT_FORMATS = ("csv", "json", "markdown")

_MODEL_ALIASES = {"n-linear": "linear", "u-mars": "mars", "u-hidden": "hidden"}


def resolve_mtry(rule, p: int) -> int:
    """Resolve ``"p/3"``, ``"p/2"``, ``"p"`` or an explicit count against p."""
    if isinstance(rule, str):
        token = rule.strip().lower().replace(" ", "")
        if token == "p/3":
            return max(p // 3, 1)
        if token == "p/2":
            return max(p // 2, 1)
        if token == "p":
            return p
        try:
            rule = int(token)
        except ValueError:
            raise InputError(f"mtry_forest: unknown rule {rule!r}; use 'p/3', 'p/2', 'p' or an integer") from None
    if isinstance(rule, bool) or int(rule) != rule:
        raise InputError(f"mtry_forest: expected an integer, got {rule!r}")
    k = int(rule)
    if not 1 <= k <= p:
        raise InputError(f"mtry_forest: {k} is outside [1, p={p}]")
    return k


@dataclass(frozen=True)
class ExperimentConfig:
    """One paired bagging-versus-forest experiment.

    The data-generating process is given by `model`, `law`, `rho`,
    `p_total`, `snr` and `normalized`; the protocol by `n`, `W`, `B`,
    `mtry_forest`, `min_node_size` and `test_size`.  Defaults are the
    full-scale protocol (W = B = 500, 10000 test points).
    """

    model: str = "linear"
    law: str = "normal"
    rho: float = 0.0
    p_total: int | None = None
    snr: float = 1.0
    normalized: bool = True
    n: int = 250
    W: int = 500
    B: int = 500
    mtry_forest: str | int = "p/3"
    min_node_size: int = 5
    test_size: int = 10_000
    master_seed: int = 0
    workers: int = 1
    output: str | None = None
    format: str = "csv"
    label: str = ""

    def __post_init__(self):
        model = str(self.model).strip().lower()
        model = _MODEL_ALIASES.get(model, model)
        try:
            kind = RegressionKind(model)
        except ValueError:
            raise InputError(f"model: unknown regression function {self.model!r}; "
                             f"expected one of {[k.value for k in RegressionKind]}") from None
        object.__setattr__(self, "model", kind.value)
        try:
            law = CovariateLaw.parse(self.law, self.rho)
        except InputError as exc:
            field_name = "rho" if "rho" in str(exc) else "law"
            raise InputError(f"{field_name}: {exc}") from None
        object.__setattr__(self, "law", law.kind.value)
        object.__setattr__(self, "rho", law.rho)
        p_total = kind.relevant_count if self.p_total is None else self.p_total
        _check_int("p_total", p_total, kind.relevant_count)
        object.__setattr__(self, "p_total", int(p_total))
        if not (isinstance(self.snr, (int, float)) and self.snr > 0 and math.isfinite(self.snr)):
            raise InputError(f"snr: must be a positive finite number, got {self.snr!r}")
        object.__setattr__(self, "snr", float(self.snr))
        if not isinstance(self.normalized, bool):
            raise InputError(f"normalized: expected true/false, got {self.normalized!r}")
        _check_int("n", self.n, 1)
        _check_int("W", self.W, 2)
        _check_int("B", self.B, 1)
        _check_int("min_node_size", self.min_node_size, 1)
        _check_int("test_size", self.test_size, 2)
        _check_int("master_seed", self.master_seed, 0)
        _check_int("workers", self.workers, 1)
        resolve_mtry(self.mtry_forest, self.p_total)
        if self.format not in OUTPUT_FORMATS:
            raise InputError(f"format: expected one of {OUTPUT_FORMATS}, got {self.format!r}")

    @property
    def covariate_law(self) -> CovariateLaw:
        return CovariateLaw(LawKind(self.law), self.rho)

    @property
    def regression(self) -> RegressionKind:
        return RegressionKind(self.model)

    @property
    def mtry(self) -> int:
        return resolve_mtry(self.mtry_forest, self.p_total)

    @property
    def display_label(self) -> str:
        if self.label:
            return self.label
        law = self.covariate_law.short
        scale = "normalized" if self.normalized else "original"
        return f"{law}-{self.model.upper()} p={self.p_total} n={self.n} SNR={self.snr:g} {scale}"

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def effective_workers(self) -> int:
        env = os.environ.get(WORKERS_ENV)
        if env:
            try:
                w = int(env)
            except ValueError:
                raise InputError(f"{WORKERS_ENV}: expected an integer, got {env!r}") from None
            if w < 1:
                raise InputError(f"{WORKERS_ENV}: must be at least 1, got {w}")
            return w
        return self.workers


def _check_int(name, value, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        raise InputError(f"{name}: expected an integer, got {value!r}")
    if value < minimum:
        raise InputError(f"{name}: must be at least {minimum}, got {value}")


_FIELD_TYPES = {
    "model": str, "law": str, "rho": float, "p_total": int, "snr": float, "normalized": bool,
    "n": int, "W": int, "B": int, "mtry_forest": str, "min_node_size": int, "test_size": int,
    "master_seed": int, "workers": int, "output": str, "format": str, "label": str,
}


def coerce_field(key: str, raw: str):
    """Convert a textual value for config field `key`."""
    if key not in _FIELD_TYPES:
        raise InputError(f"{key}: unknown config key; valid keys are {sorted(_FIELD_TYPES)}")
    kind = _FIELD_TYPES[key]
    text = raw.strip()
    if kind is str:
        if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
            text = text[1:-1]
        if key == "mtry_forest" and text.isdigit():
            return int(text)
        return text
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise InputError(f"{key}: expected true/false, got {raw!r}")
    try:
        return kind(text)
    except ValueError:
        raise InputError(f"{key}: expected {kind.__name__}, got {raw!r}") from None


def parse_config_text(text: str, **overrides) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise InputError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key in values:
            raise InputError(f"{key}: given twice (line {lineno})")
        values[key] = coerce_field(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read config file {path}: {exc}") from None
    return parse_config_text(text, **overrides)


def dump_config(config: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(config):
        value = getattr(config, f.name)
        if value is None:
            continue
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
