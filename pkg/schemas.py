from enum import Enum
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = "1"


# Enums for constrained choices
class Branch(str, Enum):
    POSITIVE = "PositiveBranch"
    NEGATIVE = "NegativeBranch"
    OFF_LEVEL_SET = "OffLevelSet"


class QuantityKind(str, Enum):
    SHIFTED_TRACE = "ShiftedTrace"
    LOG_TRACE = "LogTrace"
    LOG_LAMBDA_MAX = "LogLambdaMax"
    ALMOST_JACOBI = "AlmostJacobi"


class SolutionKind(str, Enum):
    QUADRATIC = "Quadratic"
    WARREN = "Warren"
    LI_NONDEGENERATE = "LiNondegenerate"
    LI_SINGULAR = "LiSingular"


class Preconditioner(str, Enum):
    ILU = "ilu"
    JACOBI = "jacobi"


class InitialGuess(str, Enum):
    QUADRATIC_HARMONIC = "quadratic+harmonic"
    HARMONIC = "harmonic"


class MinimalGraphKind(str, Enum):
    PLANE = "plane"
    SCHERK = "scherk"


# Spectral schemas
class Spectrum(BaseModel):
    values: List[float] = Field(..., min_length=2, examples=[[2.0, 2.0, -0.75]])

    @field_validator("values")
    @classmethod
    def validate_finite(cls, v):
        if not all(np.isfinite(v)):
            raise ValueError("eigenvalues must be finite")
        return v

    @classmethod
    def of(cls, values) -> "Spectrum":
        return cls(values=[float(x) for x in np.asarray(values, dtype=float).ravel()])

    @property
    def n(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


class BranchReport(BaseModel):
    sigma2: float
    trace: float
    hess_norm_sq: float
    concave_residual: float
    branch: Branch


class RatioReport(BaseModel):
    ratio: float
    bound_ok: bool
    dynamic_ok: bool
    semiconvex: bool


class LinTrudingerRatios(BaseModel):
    lambda_max: float
    f1_times_l1: float
    f1_over_l1: float
    fk_over_l1: List[float]


class VerticalPoint(BaseModel):
    mu: Spectrum
    K: float = Field(..., gt=0)
    delta: float = Field(..., gt=0)

    @model_validator(mode="after")
    def check_bounds(self):
        mu = self.mu.array()
        if np.any(mu <= 0) or np.any(mu > 1.0 / self.delta * (1 + 1e-12)):
            raise ValueError("vertical eigenvalues must lie in (0, 1/delta]")
        return self


class VerticalResiduals(BaseModel):
    enue: float
    ratio_form: float
    poly3: Optional[float] = None
    enc: Optional[float] = None


class TransformationCheck(BaseModel):
    horizontal_gap: float
    vertical_value: float
    sign_consistent: bool
    a: float
    a_identity_err: float
    factor: Optional[float] = None
    predicted_factor: float


# Jacobi schemas
class JacobiQuantity(BaseModel):
    kind: QuantityKind
    K: float = Field(0.0, ge=0)
    kappa: Optional[float] = Field(None, description="overrides the coefficient of |grad_F b|^2")


class GapCertificate(BaseModel):
    spectrum: Spectrum
    min_gap: float
    minimizer: List[float] = Field(..., description="independent entries of the unit-norm minimizer")
    quantity: JacobiQuantity
    kappa: float
    sharp_kappa: Optional[float] = Field(None, description="largest coefficient keeping this spectrum nonnegative")
    constraint_residual: float = 0.0
    subspace_dim: int = Field(..., ge=0)
    jitter: float = 0.0
    sample_id: Optional[int] = None


class ScanConfig(BaseModel):
    budget: int = Field(1000, ge=1)
    seed: int = 0
    refine_starts: int = Field(4, ge=0)
    margin: float = Field(1e-6, gt=0)
    dynamic_only: bool = False


class ScanResult(BaseModel):
    worst: GapCertificate
    evaluations: int
    violations: int
    budget: int
    seed: int


class ThresholdResult(BaseModel):
    threshold: float
    samples: int
    failures: int
    budget: int
    seed: int
    K: float


class GuanQiuParams(BaseModel):
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = Field(0.1, gt=0)


class DoublingResult(BaseModel):
    ratio: float
    max_outer: float
    max_inner: float
    lipschitz: float


# Zoo schemas
class ClosedFormSolution(BaseModel):
    kind: SolutionKind
    n: int = Field(..., ge=2, le=8)
    A: Optional[List[List[float]]] = None
    a: Optional[str] = Field(None, examples=["7/5"])
    b: Optional[str] = None
    c: Optional[str] = None
    gamma1: Optional[str] = None
    gamma2: Optional[str] = None

    @field_validator("a", "b", "c", "gamma1", "gamma2")
    @classmethod
    def validate_fraction(cls, v):
        if v is not None:
            Fraction(v)
        return v

    @model_validator(mode="after")
    def check_kind(self):
        if self.kind == SolutionKind.QUADRATIC:
            if self.A is None:
                raise ValueError("Quadratic needs a matrix A")
            A = np.asarray(self.A, dtype=float)
            if A.shape != (self.n, self.n):
                raise ValueError("A must be n x n")
            if np.abs(A - A.T).max() > 1e-12 * max(1.0, np.abs(A).max()):
                raise ValueError("A must be symmetric")
        elif self.kind == SolutionKind.WARREN and self.n < 3:
            raise ValueError("Warren's solution needs n >= 3")
        elif self.kind == SolutionKind.LI_NONDEGENERATE and self.n < 3:
            raise ValueError("LiNondegenerate needs n >= 3")
        elif self.kind == SolutionKind.LI_SINGULAR:
            if self.n != 8:
                raise ValueError("LiSingular lives in eight dimensions")
            if None in (self.a, self.b, self.c, self.gamma1, self.gamma2):
                raise ValueError("LiSingular needs explicit exponents and coefficients")
        return self

    @property
    def domain_note(self) -> str:
        if self.kind == SolutionKind.LI_SINGULAR:
            return "defined for x8 != 0"
        return "entire"


class BranchCensus(BaseModel):
    positive: int = 0
    negative: int = 0
    off: int = 0


class ResidualScan(BaseModel):
    solution: SolutionKind
    samples: int
    skipped: int
    max_abs_residual: float
    min_lambda_min: float
    mean_lambda_min: float
    branch: BranchCensus
    growth_exponent: Optional[float] = None


class LiResolution(BaseModel):
    a: str
    b: str
    c: str
    gamma1: str
    gamma2: str
    residual_vanishes: bool
    printed_c: str = "14/5"
    printed_gamma2: str = "-25/28"
    printed_residual: str
    solutions_found: int


class ProfilePoint(BaseModel):
    t: float
    laplacian: float


class BranchJumpProfile(BaseModel):
    points: List[ProfilePoint]
    slope: Optional[float] = None
    sign_change: bool


class QuadraticFit(BaseModel):
    A: List[List[float]]
    b: List[float]
    c: float
    max_dev: float


# Solver schemas
class SolveConfig(BaseModel):
    max_newton_iters: int = Field(40, ge=1)
    residual_tol: float = Field(1e-10, gt=0)
    backtrack: float = Field(0.5, gt=0, lt=1)
    min_step: float = Field(1e-6, gt=0, lt=1)
    linear_tol: float = Field(0.1, gt=0, lt=1, description="upper bound of the forcing term")
    linear_maxiter: int = Field(500, ge=1)
    preconditioner: Preconditioner = Preconditioner.ILU
    initial_guess: InitialGuess = InitialGuess.QUADRATIC_HARMONIC


class SolveLogEntry(BaseModel):
    iteration: int
    residual: float
    step: float
    backtracks: int
    linear_iterations: int
    forcing: float
    min_laplacian: float
    min_coefficient_eig: float


class SolveLog(BaseModel):
    branch: Branch = Branch.POSITIVE
    initial_guess: InitialGuess
    lift: float = Field(0.0, ge=0, description="multiple of the Dirichlet bubble added to reach the positive branch")
    entries: List[SolveLogEntry] = []
    converged: bool = False
    final_residual: Optional[float] = None


class ConvergenceRow(BaseModel):
    h: float
    max_error: float
    order: Optional[float] = None
    exact: bool = False
    iterations: int


# Weak-form schemas
class TestFunction(BaseModel):
    __test__ = False

    center: List[float]
    radius: float = Field(..., gt=0)
    scales: List[float]

    @model_validator(mode="after")
    def check_scales(self):
        if len(self.scales) != len(self.center):
            raise ValueError("scales and center must have the same dimension")
        if any(s <= 0 for s in self.scales):
            raise ValueError("axis scales must be positive")
        return self

    def half_widths(self) -> np.ndarray:
        return self.radius * np.asarray(self.scales, dtype=float)


class HessianMass(BaseModel):
    l1_hessian: float
    trace_integral: float
    gradient_bound: float
    surface_constant: float
    trace_ratio: Optional[float] = None
    off_cone_nodes: int
    asserted: bool


class Section(BaseModel):
    base: List[float]
    direction: List[float]
    t_min: float = -1.0
    t_max: float = 1.0
    count: int = Field(200, ge=2)


class SectionProfile(BaseModel):
    points: List[ProfilePoint]
    sign_changes: int
    divergence_slope: Optional[float] = None


# Nitsche schemas
class MinimalGraph2D(BaseModel):
    kind: MinimalGraphKind
    slope: Tuple[float, float] = (0.0, 0.0)
    half_width: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def check_patch(self):
        if self.kind == MinimalGraphKind.SCHERK and self.half_width >= np.pi / 2:
            raise ValueError("Scherk patch needs |x_i| < pi/2")
        return self


class ConjugateFieldsSummary(BaseModel):
    path_err: float
    lorentz_max: float


class HeinzSummary(BaseModel):
    det_residual: float
    sym_check: float


class MaximalResidual(BaseModel):
    residual: float
    lorentz_max: float
    identity_err: float


class MinimalSurfaceDefect(BaseModel):
    jacobi_defect: float
    jacobi_field_defect: float


class JorgensChain(BaseModel):
    laplacian_err: float
    valid_nodes: int


# Report schemas
class Violation(BaseModel):
    check: str
    detail: str
    value: Optional[float] = None


class Report(BaseModel):
    model_config = ConfigDict(ser_json_inf_nan="constants")

    schema_version: str = SCHEMA_VERSION
    command: str
    input_digest: str
    seed: Optional[int] = None
    budgets: Dict[str, int] = {}
    results: Dict[str, Any] = {}
    violations: List[Violation] = []
    wall_time: float = Field(0.0, ge=0)
