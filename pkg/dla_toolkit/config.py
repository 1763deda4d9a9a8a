"""
Resolved toolkit configuration.

Values come from the model defaults, then a flat ``key = value`` file, then
``DLA_<KEY>`` environment variables, then command-line flags. Keys are the
field names of PipelineConfig, its line geometry and EvalConfig; they do not
collide, so one flat namespace covers all three.
"""

import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from pydantic import BaseModel, ConfigDict, ValidationError

from dla_toolkit.baselines.lines import LineGeometryConfig
from dla_toolkit.errors import ConfigError
from dla_toolkit.log import log_event
from dla_toolkit.metrics.evaluate import EvalConfig
from dla_toolkit.pipeline.schemas import PipelineConfig

logger = logging.getLogger(__name__)

ENV_PREFIX = "DLA_"
PIPELINE_KEYS = tuple(k for k in PipelineConfig.model_fields if k != "line_geometry")
GEOMETRY_KEYS = tuple(LineGeometryConfig.model_fields)
EVAL_KEYS = tuple(EvalConfig.model_fields)
KNOWN_KEYS = PIPELINE_KEYS + GEOMETRY_KEYS + EVAL_KEYS


class ToolkitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    pipeline: PipelineConfig = PipelineConfig()
    evaluation: EvalConfig = EvalConfig()

    def flat(self) -> Dict[str, Any]:
        values = {key: getattr(self.pipeline, key) for key in PIPELINE_KEYS}
        values.update({key: getattr(self.pipeline.line_geometry, key) for key in GEOMETRY_KEYS})
        values.update({key: getattr(self.evaluation, key) for key in EVAL_KEYS})
        return values

    def as_lines(self) -> List[str]:
        return [f"{key} = {value}" for key, value in self.flat().items()]

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ToolkitConfig":
        """New config with flat ``overrides`` applied; ``None`` values are ignored"""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        unknown = sorted(set(overrides) - set(KNOWN_KEYS))
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(unknown)}")
        values = {**self.flat(), **overrides}
        try:
            geometry = LineGeometryConfig(**{k: values[k] for k in GEOMETRY_KEYS})
            pipeline = PipelineConfig(line_geometry=geometry, **{k: values[k] for k in PIPELINE_KEYS})
            evaluation = EvalConfig(**{k: values[k] for k in EVAL_KEYS})
        except ValidationError as e:
            raise ConfigError(f"invalid configuration: {e}") from e
        return ToolkitConfig(pipeline=pipeline, evaluation=evaluation)


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    values = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"{source}:{number}: expected 'key = value', got {raw.strip()!r}")
        values[key.strip()] = value.strip()
    return values


def env_overrides(environ: Mapping[str, str]) -> Dict[str, str]:
    return {key: environ[ENV_PREFIX + key.upper()] for key in KNOWN_KEYS if ENV_PREFIX + key.upper() in environ}


def load_config(path=None, environ: Optional[Mapping[str, str]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> ToolkitConfig:
    config = ToolkitConfig()
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}") from e
        config = config.with_overrides(parse_config_text(text, str(path)))
    env = env_overrides(os.environ if environ is None else environ)
    if env:
        log_event(logger, "config_env_overrides", keys=",".join(sorted(env)))
        config = config.with_overrides(env)
    if overrides:
        config = config.with_overrides(overrides)
    return config
