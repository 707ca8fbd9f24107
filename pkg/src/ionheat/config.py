"""Run configuration: a JSON document with one block per subcommand.

Unknown keys are rejected everywhere. Units follow the field-name suffixes
(MHz, um, ms, ...); conversion to SI happens when the CLI dispatches.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError

SCHEMA_VERSION = 1


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class JohnsonBlock(_Block):
    resistance_ohm: float = Field(ge=0)
    temperature_K: float = Field(300.0, gt=0)
    distance_um: float = Field(gt=0)


class PatchBlock(_Block):
    coverage: float = Field(1.0, gt=0, le=1)
    patch_radius_um: float = Field(gt=0)
    SV_V2_per_Hz: float = Field(ge=0)
    distance_um: float = Field(gt=0)


class SpectrumBlock(_Block):
    kind: Literal["flat", "power-law"] = "flat"
    amplitude: float = Field(ge=0)
    exponent: float = 0.0
    ref_MHz: float = Field(1.0, gt=0)


class CrossTermBlock(_Block):
    drive_MHz: float = Field(gt=0)
    SE_sidebands: float = Field(ge=0)


SWEEPABLE = ("distance_um", "secular_MHz", "resistance_ohm", "temperature_K",
             "SV_V2_per_Hz", "patch_radius_um", "coverage", "amplitude")


class SweepBlock(_Block):
    parameter: Literal[SWEEPABLE]  # type: ignore[valid-type]
    values: list[float] = Field(min_length=1)


class PredictConfig(_Block):
    ion: str = "Be9"
    secular_MHz: float = Field(10.0, gt=0)
    model: Literal["johnson", "patch", "spectrum"]
    johnson: Optional[JohnsonBlock] = None
    patch: Optional[PatchBlock] = None
    spectrum: Optional[SpectrumBlock] = None
    cross_term: Optional[CrossTermBlock] = None
    sweep: Optional[SweepBlock] = None

    @model_validator(mode="after")
    def _model_block_present(self):
        if getattr(self, self.model) is None:
            raise ValueError(f"model {self.model!r} selected but no {self.model!r} block given")
        return self


class ThermalFieldConfig(_Block):
    ion: str = "Be9"
    secular_MHz: float = Field(10.0, gt=0)
    conductivity_S_per_m: float = Field(1.87e7, gt=0)
    temperature_K: float = Field(300.0, gt=0)
    z_um: Optional[list[float]] = None
    z_min_um: float = Field(1.0, gt=0)
    z_max_um: float = Field(10000.0, gt=0)
    n_points: int = Field(61, ge=2)
    compare_numeric: bool = False
    rtol: float = Field(1e-11, ge=1e-13, lt=1)


class ScanRef(_Block):
    delay_ms: float = Field(ge=0)
    rsb: str
    bsb: str
    k: int = Field(1, ge=1)


class AnalyzeConfig(_Block):
    dataset: Optional[str] = None
    scans: Optional[list[ScanRef]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.dataset is None) == (self.scans is None):
            raise ValueError("give exactly one of 'dataset' or 'scans'")
        return self


class PairBlock(_Block):
    label: str = "pair"
    rate_small_per_ms: float = Field(gt=0)
    rate_large_per_ms: float = Field(gt=0)
    sigma_small_per_ms: float = Field(0.0, ge=0)
    sigma_large_per_ms: float = Field(0.0, ge=0)
    size_small_um: float = Field(gt=0)
    size_large_um: float = Field(gt=0)


class ScalingConfig(_Block):
    trap_table: Optional[str] = None
    pairs: Optional[str] = None
    experiments: Optional[str] = None
    extra_pairs: list[PairBlock] = Field(default_factory=list)
    alphas: list[float] = Field(default_factory=lambda: [2.0, 4.0])
    trap_pairs: list[tuple[str, str]] = Field(default_factory=list)
    include_bundled_pairs: bool = True


class SimulateConfig(_Block):
    true_nbar0: float = Field(0.1, ge=0)
    true_ndot_per_ms: float = Field(12.0, ge=0)
    delays_ms: list[float] = Field(default_factory=lambda: [0.0, 0.03, 0.06, 0.09], min_length=2)
    base_rabi_kHz: float = Field(250.0, gt=0)
    eta: float = Field(0.2, gt=0)
    probe_time_us: Optional[float] = Field(None, gt=0)
    n_points: int = Field(41, ge=5)
    half_span: float = Field(10.0, gt=0)
    shots: int = Field(500, ge=1)
    k: int = Field(1, ge=1)
    exact: bool = False
    batch: int = Field(0, ge=0)


class RunConfig(_Block):
    schema_version: Literal[1] = SCHEMA_VERSION
    seed: int = 0
    predict: Optional[dict] = None
    thermal_field: Optional[dict] = None
    analyze: Optional[dict] = None
    scaling: Optional[dict] = None
    simulate: Optional[dict] = None


BLOCKS = {
    "predict": PredictConfig,
    "thermal_field": ThermalFieldConfig,
    "analyze": AnalyzeConfig,
    "scaling": ScalingConfig,
    "simulate": SimulateConfig,
}


def load_config_file(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return validate(RunConfig, raw, str(path))


def _locate(text: str, loc) -> str:
    """Best-effort line number of the offending key in a JSON source."""
    if not text or not loc:
        return ""
    key = str(loc[-1]) if not isinstance(loc[-1], int) else str(loc[-2]) if len(loc) > 1 else ""
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return f":{i}"
    return ""


def validate(model, data, source: str = "<config>", block: str | None = None):
    try:
        return model.model_validate(data)
    except ValidationError as exc:
        text = ""
        try:
            text = Path(source).read_text()
        except OSError:
            pass
        msgs = []
        for e in exc.errors():
            loc = ((block,) if block else ()) + tuple(e["loc"])
            msgs.append(f"{source}{_locate(text, loc)}: {'.'.join(map(str, loc)) or '<root>'}: {e['msg']}")
        raise ConfigError("; ".join(msgs)) from None


def resolve_block(run: RunConfig, name: str, overrides: dict, source: str = "<config>"):
    """Merge command-line overrides onto a config block and validate it."""
    base = dict(getattr(run, name) or {})
    for key, value in overrides.items():
        if value is not None:
            base[key] = value
    return validate(BLOCKS[name], base, source, name)
