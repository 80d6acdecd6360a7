"""Scenario files: a strict TOML schema for one problem instance.

Layout (``schema = 1``)::

    [demand]        annual, lead_time_lower, lead_time_upper
    [costs]         ordering, holding, shortage, temp_variable, hum_variable,
                    temp_fixed, hum_fixed, packaging = [3], environment = [3]
    [limits]        max_avg_shortage, min_quality, space_per_unit, capacity,
                    max_orders, reorder_lower, reorder_upper
    [climate]       temp_lower, temp_upper, hum_lower, hum_upper
    [quality_model] x1, x2, x3, x4, intercept
    [generator]     optional: noise_std, temp_range, hum_range, and x1..x4,
                    intercept to override the data-generating model
    [rng]           seed

Every section except [generator] is required; every key listed for a
required section is required; any other key is rejected.
"""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import DomainError, ScenarioError
from .io import fmt_number
from .model import LeadTimeDemand, QualityModel, ScenarioParameters
from .quality import GeneratorSpec

SCHEMA_VERSION = 1

# (section, key) -> ScenarioParameters field
PARAM_KEYS = {
    ("costs", "ordering"): "ordering_cost",
    ("costs", "holding"): "holding_cost",
    ("costs", "shortage"): "shortage_penalty",
    ("costs", "temp_variable"): "temp_var_cost",
    ("costs", "hum_variable"): "hum_var_cost",
    ("costs", "temp_fixed"): "temp_fixed_cost",
    ("costs", "hum_fixed"): "hum_fixed_cost",
    ("costs", "packaging"): "packaging_costs",
    ("costs", "environment"): "environment_costs",
    ("demand", "annual"): "annual_demand",
    ("limits", "max_avg_shortage"): "max_avg_shortage",
    ("limits", "min_quality"): "min_quality",
    ("limits", "space_per_unit"): "space_per_unit",
    ("limits", "capacity"): "capacity",
    ("limits", "max_orders"): "max_orders",
    ("limits", "reorder_lower"): "reorder_lower",
    ("limits", "reorder_upper"): "reorder_upper",
    ("climate", "temp_lower"): "temp_lower",
    ("climate", "temp_upper"): "temp_upper",
    ("climate", "hum_lower"): "hum_lower",
    ("climate", "hum_upper"): "hum_upper",
}
MODEL_KEYS = ("x1", "x2", "x3", "x4", "intercept")

SCHEMA = {
    "demand": ("annual", "lead_time_lower", "lead_time_upper"),
    "costs": ("ordering", "holding", "shortage", "temp_variable", "hum_variable", "temp_fixed", "hum_fixed", "packaging", "environment"),
    "limits": ("max_avg_shortage", "min_quality", "space_per_unit", "capacity", "max_orders", "reorder_lower", "reorder_upper"),
    "climate": ("temp_lower", "temp_upper", "hum_lower", "hum_upper"),
    "quality_model": MODEL_KEYS,
    "rng": ("seed",),
}
OPTIONAL_SECTIONS = {"generator": ("noise_std", "temp_range", "hum_range") + MODEL_KEYS}
TRIPLES = {("costs", "packaging"), ("costs", "environment")}
PAIRS = {("generator", "temp_range"), ("generator", "hum_range")}


@dataclass(frozen=True)
class ScenarioFile:
    params: ScenarioParameters
    model: QualityModel
    generator: GeneratorSpec | None
    seed: int
    path: Path | None = None


class _Locator:
    """Maps ``section.key`` to a 1-based line number in the source text."""

    _header = re.compile(r"^\s*\[\s*([A-Za-z0-9_.-]+)\s*\]")
    _assign = re.compile(r"^\s*([A-Za-z0-9_-]+)\s*=")

    def __init__(self, text: str):
        self.lines: dict[str, int] = {}
        section = ""
        for lineno, line in enumerate(text.splitlines(), start=1):
            m = self._header.match(line)
            if m:
                section = m.group(1)
                self.lines.setdefault(section, lineno)
                continue
            m = self._assign.match(line)
            if m:
                key = f"{section}.{m.group(1)}" if section else m.group(1)
                self.lines.setdefault(key, lineno)

    def __call__(self, key: str) -> int | None:
        return self.lines.get(key)


def _number(value, key, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"expected a number, got {type(value).__name__}", key, where(key))
    if not math.isfinite(value):
        raise ScenarioError("value must be finite", key, where(key))
    return float(value)


def _numbers(value, n, key, where):
    if not isinstance(value, list) or len(value) != n:
        raise ScenarioError(f"expected a list of {n} numbers", key, where(key))
    return tuple(_number(v, key, where) for v in value)


def loads_scenario(text: str, path: Path | None = None) -> ScenarioFile:
    where = _Locator(text)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"TOML syntax error: {exc}", None, int(line.group(1)) if line else None) from None

    if "schema" not in doc:
        raise ScenarioError("missing schema version", "schema", None)
    if doc["schema"] != SCHEMA_VERSION or isinstance(doc["schema"], bool):
        raise ScenarioError(f"unsupported schema {doc['schema']!r}, expected {SCHEMA_VERSION}", "schema", where("schema"))

    allowed = {**SCHEMA, **OPTIONAL_SECTIONS}
    for name, body in doc.items():
        if name == "schema":
            continue
        if name not in allowed:
            raise ScenarioError("unknown section or key", name, where(name))
        if not isinstance(body, dict):
            raise ScenarioError("expected a table", name, where(name))
        for key in body:
            if key not in allowed[name]:
                raise ScenarioError("unknown key", f"{name}.{key}", where(f"{name}.{key}"))
    for name, keys in SCHEMA.items():
        if name not in doc:
            raise ScenarioError("missing required section", name, None)
        for key in keys:
            if key not in doc[name]:
                raise ScenarioError("missing required key", f"{name}.{key}", where(name))

    def value(section, key):
        full = f"{section}.{key}"
        raw = doc[section][key]
        if (section, key) in TRIPLES:
            return _numbers(raw, 3, full, where)
        if (section, key) in PAIRS:
            return _numbers(raw, 2, full, where)
        return _number(raw, full, where)

    kwargs = {field: value(section, key) for (section, key), field in PARAM_KEYS.items()}
    try:
        kwargs["lead_time_demand"] = LeadTimeDemand(value("demand", "lead_time_lower"), value("demand", "lead_time_upper"))
        params = ScenarioParameters(**kwargs)
        model = QualityModel(*(value("quality_model", k) for k in MODEL_KEYS))
    except DomainError as exc:
        raise DomainError(f"{path or '<scenario>'}: {exc}") from None

    seed_raw = doc["rng"]["seed"]
    if isinstance(seed_raw, bool) or not isinstance(seed_raw, int) or seed_raw < 0:
        raise ScenarioError("seed must be a non-negative integer", "rng.seed", where("rng.seed"))

    generator = None
    if "generator" in doc:
        g = doc["generator"]
        truth = model
        if any(k in g for k in MODEL_KEYS):
            truth = QualityModel(*(value("generator", k) if k in g else getattr(model, k) for k in MODEL_KEYS))
        gkw = {"true_model": truth, "seed": seed_raw}
        for key in ("noise_std", "temp_range", "hum_range"):
            if key in g:
                gkw[key] = value("generator", key)
        gkw.setdefault("temp_range", (params.temp_lower, params.temp_upper))
        gkw.setdefault("hum_range", (params.hum_lower, params.hum_upper))
        try:
            generator = GeneratorSpec(**gkw)
        except DomainError as exc:
            raise DomainError(f"{path or '<scenario>'}: {exc}") from None

    return ScenarioFile(params=params, model=model, generator=generator, seed=seed_raw, path=path)


def parse_scenario(path) -> ScenarioFile:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return loads_scenario(text, path)


def shipped_scenario(name: str) -> Path:
    """Path of a scenario bundled with the package (``baseline`` or ``paper_table4``)."""
    if not name.endswith(".toml"):
        name += ".toml"
    return Path(str(resources.files("coldopt") / "scenarios" / name))


def model_fragment(model: QualityModel, comment: str | None = None) -> str:
    lines = []
    if comment:
        lines += [f"# {line}" for line in comment.splitlines()]
    lines.append("[quality_model]")
    lines += [f"{k} = {fmt_number(getattr(model, k))}" for k in MODEL_KEYS]
    return "\n".join(lines) + "\n"
