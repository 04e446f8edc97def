"""
Validated experiment configuration.

``ExperimentConfig.for_scenario`` starts from the published parameter set of
each case study; every field can then be overridden.
"""

import logging
import math

from django.conf import settings
from django.db import models
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dynamics.scenarios import CwVariant, Scenario

logger = logging.getLogger(__name__)


class Framework(models.TextChoices):
    LQG = 'lqg', 'LQG'
    LQR_MSIF = 'lqr-msif', 'LQR-MSIF'
    SNN_LQR_MSIF = 'snn-lqr-msif', 'SNN-LQR-MSIF'
    SNN_MSIF_LQR = 'snn-msif-lqr', 'SNN-MSIF + LQR'

    @property
    def is_spiking(self) -> bool:
        return self in (Framework.SNN_LQR_MSIF, Framework.SNN_MSIF_LQR)


class SilenceEvent(BaseModel):
    """Neurons removed from firing at ``time``: explicit indices or a random fraction"""
    model_config = ConfigDict(extra='forbid', frozen=True)

    time: float = Field(ge=0)
    neurons: list[int] | None = None
    fraction: float | None = Field(None, gt=0, lt=1)

    @model_validator(mode='after')
    def one_selector(self):
        if (self.neurons is None) == (self.fraction is None):
            raise ValueError("silence event needs exactly one of 'neurons' or 'fraction'")
        if self.neurons is not None and any(i < 0 for i in self.neurons):
            raise ValueError("neuron indices must be nonnegative")
        return self


class UncertaintySpec(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True)

    model_scale: float = Field(1.0, gt=0, description="Design model uses A_hat = model_scale * A")
    outlier_times: list[float] = Field(default_factory=list)
    outlier_scale: float = Field(1.0, ge=1)
    silence_schedule: list[SilenceEvent] = Field(default_factory=list)


# Published parameter sets
SCENARIO_DEFAULTS = {
    Scenario.WORKBENCH: dict(
        duration=10.0, dt=0.01, N=250, lam=0.01, mu=0.005, nu=0.005, delta=0.005,
        x0=[10.0, 1.0], x_hat0=[10.0, 1.0],
        Q_c=[[1.0, 0.0], [0.0, 1.0]], R_c=[[1.0]],
        variance_D=0.25, variance_D_bar=1 / 300, error_tail_start=6.0,
    ),
    Scenario.CW: dict(
        duration=360.0, dt=0.1, N=350, lam=0.001, mu=1.0, nu=1e-4, delta=0.005,
        x0=[70.0, 30.0, -5.0, -1.7, -0.9, 0.25], x_hat0=[70.0, 30.0, -5.0, -1.7, -0.9, 0.25],
        Q_c=[[1e-6 if i == j else 0.0 for j in range(6)] for i in range(6)],
        R_c=[[1.0 if i == j else 0.0 for j in range(3)] for i in range(3)],
        variance_D=1 / 50, variance_D_bar=1 / 2500, error_tail_start=300.0,
    ),
}

# Outlier injection instants and noise multiplier used by the robustness runs
OUTLIER_PRESETS = {
    Scenario.WORKBENCH: ([3.0, 5.0, 6.0], 500.0),
    Scenario.CW: ([100.0, 150.0, 200.0], 200.0),
}

# Overrides that may be set to None on purpose
NULLABLE_FIELDS = {'innovation_gate'}

# Design-model scale used by the model-uncertainty runs
UNCERTAIN_MODEL_SCALE = {
    Scenario.WORKBENCH: 0.8,
    Scenario.CW: 0.9,
}


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    scenario: Scenario = Scenario.WORKBENCH
    framework: Framework = Framework.SNN_LQR_MSIF
    duration: float = Field(gt=0)
    dt: float = Field(gt=0)
    N: int = Field(ge=1)
    lam: float = Field(gt=0)
    mu: float = Field(ge=0)
    nu: float = Field(ge=0)
    delta: float = Field(gt=0)
    unmeasured_gain: float = Field(0.1, ge=0, description="Network correction rate (1/s) for states C does not see")
    innovation_gate: float | None = Field(5.0, gt=0, description="Innovation gate in innovation standard deviations")
    eta_std: float = Field(0.0, ge=0)
    seeds: list[int] = Field(default_factory=lambda: [0])
    uncertainty: UncertaintySpec = Field(default_factory=UncertaintySpec)
    metrics_window: int = Field(default_factory=lambda: settings.SPIKEREG_ACTIVE_WINDOW, ge=1)
    error_tail_start: float = Field(ge=0)
    x0: list[float]
    x_hat0: list[float]
    Q_c: list[list[float]]
    R_c: list[list[float]]
    variance_D: float = Field(gt=0)
    variance_D_bar: float = Field(gt=0)
    P0_scale: float = Field(1e-2, ge=0)
    noise_on: bool = True
    cw_variant: CwVariant = CwVariant.PUBLISHED

    @classmethod
    def for_scenario(cls, scenario: str = Scenario.WORKBENCH, **overrides) -> 'ExperimentConfig':
        """Published defaults for ``scenario`` updated with ``overrides``"""
        scenario = Scenario(scenario)
        params = dict(SCENARIO_DEFAULTS[scenario])
        params.update({k: v for k, v in overrides.items() if v is not None or k in NULLABLE_FIELDS})
        return cls(scenario=scenario, **params)

    @field_validator('seeds')
    @classmethod
    def seeds_nonempty(cls, value):
        if not value:
            raise ValueError("at least one seed is required")
        return value

    @model_validator(mode='after')
    def check_consistency(self):
        ratio = self.duration / self.dt
        if not math.isclose(ratio, round(ratio), rel_tol=0, abs_tol=1e-6):
            raise ValueError(f"duration {self.duration} is not a whole number of steps of {self.dt}")
        if len(self.x0) != len(self.x_hat0):
            raise ValueError("x0 and x_hat0 have different lengths")
        if self.error_tail_start >= self.duration:
            raise ValueError(f"error_tail_start {self.error_tail_start} must precede the end of the run")
        for t in self.uncertainty.outlier_times:
            if not 0 <= t <= self.duration:
                raise ValueError(f"outlier time {t} outside [0, {self.duration}]")
        for event in self.uncertainty.silence_schedule:
            if event.time > self.duration:
                raise ValueError(f"silence time {event.time} outside [0, {self.duration}]")
            if event.neurons is not None and any(i >= self.N for i in event.neurons):
                raise ValueError(f"silenced neuron index out of range for N={self.N}")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def step_of(self, t: float) -> int:
        return int(round(t / self.dt))
