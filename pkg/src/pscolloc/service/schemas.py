"""Request and response models shared by the HTTP service and the CLI.

Every response carries a ``schema_version`` string so downstream tooling
can detect format changes; the CLI stamps the same strings into the files
it writes.
"""
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

SUMMARY_SCHEMA = "pscolloc-summary-v1"
TRAJECTORY_SCHEMA = "pscolloc-trajectory-v1"
SWEEP_SCHEMA = "pscolloc-sweep-v1"
IVP_SCHEMA = "pscolloc-ivp-v1"

ProblemName = Literal["pendulum", "cartpole"]
SchemeChoice = Literal["lg", "lg2", "both"]
SchemeName = Literal["lg", "lg2"]


class SolverSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    feas_tol: float = Field(default=1e-8, gt=0)
    opt_tol: float = Field(default=1e-6, gt=0)
    max_iter: int = Field(default=30, ge=1)


class ParamOverrides(BaseModel):
    """Benchmark parameter overrides, merged onto the packaged defaults."""

    model_config = ConfigDict(extra="forbid")

    pendulum: dict[str, float] = Field(default_factory=dict)
    cartpole: dict[str, float] = Field(default_factory=dict)


class SolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemName
    scheme: SchemeChoice = "lg2"
    N: int = Field(ge=1, le=64)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    params: ParamOverrides = Field(default_factory=ParamOverrides)
    include_trajectories: bool = True
    trajectory_points: int = Field(default=1000, ge=2, le=100_000)
    seed: Optional[int] = None  # reserved; every component is deterministic


class SolveRecord(BaseModel):
    problem: str
    scheme: SchemeName
    N: int
    status: str
    converged: bool
    objective: float
    t_f: float
    iterations: int
    wall_s: float
    eq_violation: float
    ineq_violation: float
    e1_per_coord: list[float]
    e2_per_coord: list[float]
    e1_joint: Optional[float]
    e2_joint: Optional[float]
    message: str = ""


class TrajectorySamples(BaseModel):
    schema_version: str = TRAJECTORY_SCHEMA
    problem: str
    scheme: SchemeName
    N: int
    columns: list[str]
    rows: list[list[float]]


class SolveResponse(BaseModel):
    schema_version: str = SUMMARY_SCHEMA
    config: SolveRequest
    records: list[SolveRecord]
    trajectories: list[TrajectorySamples]


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemName
    scheme: SchemeChoice = "both"
    N_list: list[int] = Field(min_length=1)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    params: ParamOverrides = Field(default_factory=ParamOverrides)
    seed: Optional[int] = None  # reserved


class SweepRow(BaseModel):
    scheme: SchemeName
    N: int
    e2_per_coord: list[float]
    e2_joint: Optional[float]
    e1_per_coord: list[float]
    e1_joint: Optional[float]
    objective: float
    t_f: float
    iterations: int
    wall_s: float
    status: str


class SweepResponse(BaseModel):
    schema_version: str = SWEEP_SCHEMA
    config: SweepRequest
    rows: list[SweepRow]


class IvpRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemName
    q0: list[float]
    v0: Optional[list[float]] = None
    control: str = "0"
    t_f: float = Field(gt=0)
    N: int = Field(ge=1, le=64)
    scheme: SchemeName = "lg2"
    oracle_tol: float = Field(default=1e-10, ge=1e-13, le=1e-6)
    grid_points: int = Field(default=201, ge=2, le=100_000)
    params: ParamOverrides = Field(default_factory=ParamOverrides)


class IvpResponse(BaseModel):
    schema_version: str = IVP_SCHEMA
    config: IvpRequest
    endpoint_discrepancy: float
    max_grid_discrepancy: float
    final_config: list[float]
    final_velocity: list[float]
    converged: bool
    message: str = ""
