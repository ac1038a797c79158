"""Benchmark configuration: one structured record covering every knob.

The JSON layout mirrors the dataclasses: a ``scenario`` block (market and
fold sizes), a ``validator`` block (band calibration and radius clipping),
a ``weights`` block (density-ratio classifier), and a ``candidates`` block
(radius grid, Dirichlet menu, training-weight blend).  ``gamma`` is
normally null and calibrated per replication from the equal-weight
portfolio's training CVaR times ``1 + gamma_margin``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from cvarcert.simulate import ScenarioConfig, ShiftConfig


@dataclass(frozen=True)
class WeightConfig:
    clip_lo: float = 0.1
    clip_hi: float = 10.0
    l2_penalty: float = 0.1


@dataclass(frozen=True)
class CandidateConfig:
    delta_grid_min: float = 1e-3
    delta_grid_max: float = 2e-2
    delta_grid_size: int = 8
    n_dirichlet: int = 8
    dirichlet_concentration: float = 1.0
    min_risk_anchor: bool = True  # span the menu down to the defensive end
    train_weight_blend: float = 0.5  # share of uniform mass in training weights

    def grid(self) -> np.ndarray:
        return np.geomspace(self.delta_grid_min, self.delta_grid_max, self.delta_grid_size)


@dataclass(frozen=True)
class ValidatorConfig:
    block_length: int | None = None  # None: round(n_val^(1/3))
    bootstrap_draws: int = 800
    delta_min: float = 1e-3
    delta_max: float = 2e-2
    n_eff_min: float = 30.0
    k_folds: int = 5
    cv_fallback: bool = True


@dataclass(frozen=True)
class BenchmarkConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    validator: ValidatorConfig = field(default_factory=ValidatorConfig)
    weights: WeightConfig = field(default_factory=WeightConfig)
    candidates: CandidateConfig = field(default_factory=CandidateConfig)
    gamma_margin: float = 0.10
    gamma: float | None = None  # fixed budget override, mostly for tests

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BenchmarkConfig":
        raw = json.loads(text)
        scenario_raw = dict(raw.get("scenario", {}))
        shift = ShiftConfig(**scenario_raw.pop("shift", {}))
        for key in ("mu", "vols"):
            if key in scenario_raw and scenario_raw[key] is not None:
                scenario_raw[key] = tuple(scenario_raw[key])
        return cls(
            scenario=ScenarioConfig(shift=shift, **scenario_raw),
            validator=ValidatorConfig(**raw.get("validator", {})),
            weights=WeightConfig(**raw.get("weights", {})),
            candidates=CandidateConfig(**raw.get("candidates", {})),
            gamma_margin=raw.get("gamma_margin", 0.10),
            gamma=raw.get("gamma"),
        )

    @classmethod
    def from_file(cls, path) -> "BenchmarkConfig":
        return cls.from_json(Path(path).read_text())

    def to_file(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")
