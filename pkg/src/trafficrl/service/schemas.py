"""Request and response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Any, Literal, Union

from pydantic import BaseModel, Field

ScenarioRef = Union[str, dict[str, Any]]


class TrainRequest(BaseModel):
    scenario: ScenarioRef
    regime: Literal["single", "inrl", "shared_async"] | None = None
    coordination: Literal["on", "off"] | None = None
    config: str | dict[str, Any] | None = None
    seed: int | None = None
    out: str


class TrainResponse(BaseModel):
    out: str
    regime: str
    checkpoints: dict[str, str]
    store_updates: dict[str, int]
    plans_checked: int
    plan_violations: list[str]
    worker_errors: dict[str, str]
    seconds: float


class EpisodeSummary(BaseModel):
    seed: int
    mean_delay: float
    mean_density: float
    samples: int


class EvaluateRequest(BaseModel):
    checkpoint: str | dict[str, str]
    scenario: ScenarioRef
    episodes: int = Field(5, ge=1)
    seed: int = 1
    window: float = Field(90.0, gt=0)
    greedy: bool = True
    out: str | None = None


class EvaluateResponse(BaseModel):
    episodes: list[EpisodeSummary]
    mean_delay: float
    mean_density: float
    plan_violations: list[str]


class BaselineRequest(BaseModel):
    fst: str | float
    scenario: ScenarioRef
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    window: float = Field(90.0, gt=0)
    out: str | None = None


class BaselineResponse(BaseModel):
    label: str
    episodes: list[EpisodeSummary]
    mean_delay: float
    mean_density: float
    files: list[str]


class ExperimentRequest(BaseModel):
    spec: str | dict[str, Any]
    out: str


class SummaryRowModel(BaseModel):
    controller: str
    seeds: int
    delay_mean: float
    delay_sd: float
    density_mean: float
    density_sd: float
    delay_change_pct: float
    density_change_pct: float


class ExperimentResponse(BaseModel):
    out: str
    paired_arrivals: bool
    plan_violations: list[str]
    summary: list[SummaryRowModel]


class SummarizeRequest(BaseModel):
    dir: str
    reference: str = "FST60"
    out: str | None = None


class SummarizeResponse(BaseModel):
    path: str | None
    rows: list[SummaryRowModel]


class ErrorResponse(BaseModel):
    error: str
    kind: str
