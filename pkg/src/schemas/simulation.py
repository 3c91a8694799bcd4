"""
Pydantic schemas for simulation runs.
"""
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, root_validator, validator

MAX_WORKERS = 255


class Scheme(str, Enum):
    """Offloading schemes compared by the simulator."""
    PRAC = "PRAC"
    STAIRCASE = "Staircase"
    C3P = "C3P"
    GC3P = "GC3P"


class Scenario(str, Enum):
    """Worker speed profiles."""
    ONE = "1"
    TWO = "2"
    THREE = "3"
    HOMOGENEOUS = "homogeneous"
    CLUSTERED = "clustered"
    CUSTOM = "custom"


class AdversaryRule(str, Enum):
    """Which workers GC3P treats as the colluding set."""
    FASTEST = "fastest"
    SLOWEST = "slowest"
    RANDOM = "random"


class C3PWorkers(str, Enum):
    """Worker set for the non-private C3P baseline."""
    ALL = "all"
    N_MINUS_Z = "n_minus_z"


class EpsilonMode(str, Enum):
    """Source of the fountain overhead used by closed-form evaluators."""
    MEASURED = "measured"
    NOMINAL = "nominal"


class SimConfig(BaseModel):
    """One simulated configuration; drives every stochastic run."""
    n: int = Field(..., ge=1, le=MAX_WORKERS, description="Number of workers")
    z: int = Field(..., ge=0, description="Colluding workers")
    b: int = Field(..., ge=1, description="Row blocks of A")
    m: int = Field(..., ge=1, description="Rows of A")
    ell: int = Field(..., ge=1, description="Columns of A")
    scenario: Scenario = Field(default=Scenario.ONE)
    lam: float = Field(default=1.0, gt=0, description="Rate for the homogeneous scenario")
    lambdas: Optional[List[float]] = Field(default=None, description="Per-worker rates for the custom scenario")
    capacity_range: Tuple[float, float] = Field(
        default=(10e6, 20e6),
        description="Uniform range of mean link capacities (bits/s)",
    )
    adversary_rule: AdversaryRule = Field(default=AdversaryRule.RANDOM)
    c3p_workers: C3PWorkers = Field(default=C3PWorkers.ALL)
    seed: int = Field(default=0, ge=0)

    @validator("z")
    def validate_z(cls, z, values):
        """Ensure 0 <= z < n."""
        if "n" in values and z >= values["n"]:
            raise ValueError(f"z ({z}) must be smaller than n ({values['n']})")
        return z

    @validator("lambdas")
    def validate_lambdas(cls, lambdas):
        """Ensure every rate is positive."""
        if lambdas is not None and any(lam <= 0 for lam in lambdas):
            raise ValueError("every lambda must be positive")
        return lambdas

    @validator("capacity_range")
    def validate_capacity_range(cls, capacity_range):
        low, high = capacity_range
        if not 0 < low <= high:
            raise ValueError("capacity range must satisfy 0 < low <= high")
        return capacity_range

    @root_validator(skip_on_failure=True)
    def validate_custom(cls, values):
        """A custom scenario needs exactly n rates."""
        if values["scenario"] == Scenario.CUSTOM:
            lambdas = values.get("lambdas")
            if lambdas is None or len(lambdas) != values["n"]:
                raise ValueError("custom scenario needs one lambda per worker")
        return values

    @property
    def block_rows(self) -> int:
        """Rows per block after zero padding."""
        return -(-self.m // self.b)

    class Config:
        frozen = True


class DelayModel(BaseModel):
    """Per-worker delay parameters drawn for one trial."""
    lambdas: List[float] = Field(..., description="Exponential rates (1/s)")
    shifts: List[float] = Field(..., description="Shifts c_i = 1/lambda_i (s)")
    capacities: List[float] = Field(..., description="Mean link capacities C_i (bits/s)")

    @root_validator(skip_on_failure=True)
    def validate_lengths(cls, values):
        if not len(values["lambdas"]) == len(values["shifts"]) == len(values["capacities"]):
            raise ValueError("delay model vectors differ in length")
        return values

    @property
    def n(self) -> int:
        return len(self.lambdas)


class CompletionRecord(BaseModel):
    """One trial of one scheme; the CSV row unit."""
    scheme: Scheme
    n: int
    z: int
    b: int
    m: int
    ell: int
    scenario: Scenario
    adversary_rule: AdversaryRule
    trial: int = Field(..., ge=0)
    seed: int
    completion_time_s: float = Field(..., gt=0)
    packets_sent: int = Field(..., ge=0)
    epsilon_observed: Optional[int] = None


class BatchSummary(BaseModel):
    """Mean completion time with a Student-t 95% interval."""
    scheme: Scheme
    trials: int
    mean: float
    std: float
    ci_low: float
    ci_high: float
    mean_epsilon: Optional[float] = None
    staircase_k: Optional[int] = Field(default=None, description="Chosen k for Staircase")
