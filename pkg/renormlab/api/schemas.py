"""Pydantic run configuration and report schemas."""
from typing import Any, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from renormlab import config

SCHEMA_VERSION = 1

Family = Literal["degenerate", "trivial-extension", "example-N", "custom-polynomial"]


def _parse_term_key(key: str, arity: int) -> tuple[int, ...]:
    parts = tuple(int(p) for p in str(key).replace(" ", "").split(","))
    if len(parts) != arity or any(p < 0 for p in parts):
        raise ValueError(f"term key {key!r} must be {arity} non-negative exponents")
    return parts


# --- Run configuration ---
class MapParams(BaseModel):
    C: float = 0.02
    b: float = 0.1
    eta_kind: Literal["sin", "poly"] = "sin"
    eta_amplitude: float = 0.1
    eta_coeffs: list[float] = Field(default_factory=list)
    eps_kind: Literal["zero", "y", "y-xy", "poly"] = "zero"
    eps_amplitude: float = 0.01
    eps_kappa: float = 0.5
    eps_terms: dict[str, float] = Field(default_factory=dict, description="'i,j,k' -> coefficient of x^i y^j z^k")
    delta_terms: dict[str, float] = Field(default_factory=dict, description="added to delta for any family")
    f_coeffs: Optional[list[float]] = None
    degree: int = config.FIXED_POINT_DEGREE
    eps_budget: float = config.EPS_BUDGET
    tune: bool = False

    @field_validator("eps_terms", "delta_terms")
    @classmethod
    def _keys_are_exponents(cls, v: dict[str, float]) -> dict[str, float]:
        for key in v:
            _parse_term_key(key, 3)
        return v

    @model_validator(mode="after")
    def _within_budget(self) -> "MapParams":
        bar = self.eps_budget
        if self.eps_kind != "zero" and abs(self.eps_amplitude) > bar:
            raise ValueError(f"eps_amplitude {self.eps_amplitude} exceeds budget {bar}")
        if abs(self.b) > bar or abs(self.C) > bar:
            raise ValueError(f"b and C must be at most {bar} in size")
        if self.f_coeffs is not None and (not self.f_coeffs or self.f_coeffs[0] != 1.0):
            raise ValueError("f_coeffs must start with 1.0")
        return self

    def terms(self, which: str) -> dict[tuple[int, int, int], float]:
        raw = self.eps_terms if which == "eps" else self.delta_terms
        return {_parse_term_key(k, 3): float(c) for k, c in raw.items()}


class Tolerances(BaseModel):
    class_n: float = 1e-8
    ddelta: float = 1e-7
    jac: float = 1e-7
    dx_sum: float = 1e-7
    dy: float = 1e-7
    conjugacy: float = 1e-7
    psi_identities: float = 1e-7
    dut: float = 1e-6
    cocycle: float = 1e-8
    reassembly: float = 1e-9
    R: float = 1e-9
    z_difference: float = 1e-7
    boxing: float = 1e-8
    product: float = 1e-7
    # bracket of class-N levels, absolute
    ddelta_bracket: float = 1e-10
    # one-sided: log|sigma| / fitted log-slope, so faster-than-sigma decay passes
    R_rate: float = 3.0
    dy_rate: float = 1.0 / 0.7
    a_spread: float = 0.25


class RunConfig(BaseModel):
    family: Family = "example-N"
    params: MapParams = Field(default_factory=MapParams)
    depth: int = 4
    nmax: Optional[int] = None
    kmax: int = 2
    lattice: int = 4
    points: int = 50
    checks: Optional[list[str]] = None
    tolerances: Tolerances = Field(default_factory=Tolerances)
    output_dir: str = str(config.OUTPUT_DIR)
    workers: int = config.THREADS
    seed: int = config.SEED

    @field_validator("depth")
    @classmethod
    def _depth_budget(cls, v: int) -> int:
        if not 0 <= v <= config.DEPTH_BUDGET:
            raise ValueError(f"depth {v} outside 0..{config.DEPTH_BUDGET}")
        return v

    @field_validator("lattice")
    @classmethod
    def _lattice_size(cls, v: int) -> int:
        if v < 2:
            raise ValueError("lattice needs at least 2 points per axis")
        return v

    @field_validator("workers", "points")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be positive")
        return v

    @property
    def universal_depth(self) -> int:
        return self.depth if self.nmax is None else min(self.nmax, self.depth)


# --- Reports ---
class StepRecord(BaseModel):
    module: str
    prompt: Any
    response: Any


class FixedPointReport(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    degree: int
    tol: float
    coeffs: list[float]
    sigma: float
    residual: float
    iterations: int

    model_config = {"populate_by_name": True}


class CheckRecord(BaseModel):
    check: str
    label: str
    value: Optional[float] = None
    threshold: Optional[float] = None
    status: Literal["ok", "fail", "n/a"]


class VerifyReport(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    family: str
    depth: int
    seed: int
    points: int
    checks: list[CheckRecord] = Field(default_factory=list)
    failed: list[str] = Field(default_factory=list)
    passed: bool = True

    model_config = {"populate_by_name": True}


class LevelRow(BaseModel):
    level: int
    sigma: Optional[float] = None
    f_coeffs: list[float]
    eps_norm: float
    delta_norm: float
    fit_residual: Optional[float] = None


class CascadeReport(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    family: str
    depth: int
    seed: int
    levels: list[LevelRow] = Field(default_factory=list)
    tune: Optional[dict[str, Any]] = None

    model_config = {"populate_by_name": True}


class UniversalReport(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    family: str
    depth: int
    nmax: int
    b2: float
    b1: float
    bF: float
    product_residual: float
    # null when the b2 sequence is already constant
    rho_fit: Optional[float] = None
    b2_averaged: list[float] = Field(default_factory=list)
    b2_pointwise: list[float] = Field(default_factory=list)
    b1_expression_logs: list[float] = Field(default_factory=list)
    b1_slope: Optional[float] = None
    b1_spread: Optional[float] = None
    planar_bF: Optional[float] = None
    birkhoff_log_bF: Optional[float] = None
    a_samples: list[tuple[float, float]] = Field(default_factory=list)
    a_spread: Optional[float] = None

    model_config = {"populate_by_name": True}


class FrameRow(BaseModel):
    k: int
    n: int
    alpha: float
    sigma_nk: float
    t: float
    u: float
    d: float
    R_norm: float
    R_prime_norm: float


class PieceRow(BaseModel):
    word: str
    level: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    z_min: float
    z_max: float
    diameter: float


class TipRow(BaseModel):
    level: int
    tau_x: float
    tau_y: float
    tau_z: float
    c_x: float
    c_y: float
    c_z: float
    radius: float
    drift: float


class GeometryRow(BaseModel):
    k: int
    n: int
    word: str
    diam_v: float
    diam_c: float
    dist_min: float
    ratio: float
    overlap: bool
    overlap_width: float
    log_sigma_k: float
    t_nk: Optional[float] = None
    log_b1_2k: Optional[float] = None


class CriterionRow(BaseModel):
    k: int
    n: int
    gap: float


class OverlapTuningReport(BaseModel):
    k: int
    n: int
    param_name: str
    param: float
    width: float
    iterations: int
    b1: Optional[float] = None
    # |2^k log b1 - (n - k) log|sigma|| at the tuned parameter
    gap: Optional[float] = None


class GeometrySummary(BaseModel):
    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    family: str
    depth: int
    kmax: int
    sigma: float
    b1: Optional[float] = None
    rows: int
    min_ratio_by_k: dict[str, float] = Field(default_factory=dict)
    ratio_slope: Optional[float] = None
    ratio_monotone: Optional[bool] = None
    ratio_consistent: Optional[bool] = None
    diameter_fit: Optional[dict[str, float]] = None
    t_vs_b1_stalled: Optional[bool] = None
    criterion: list[CriterionRow] = Field(default_factory=list)
    holder: Optional[float] = None
    overlap: Optional[OverlapTuningReport] = None

    model_config = {"populate_by_name": True}
