import os

from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field


class Version(IntEnum):
    v1 = 1


class InequalityType(str, Enum):
    J = "J"
    K = "K"
    satwap = "satwap"


class Method(str, Enum):
    seesaw = "seesaw"
    moment = "moment"
    split = "split"
    bruteforce = "bruteforce"
    evaluate = "evaluate"


class RankMode(str, Enum):
    all = "all"
    pruned = "pruned"
    merged = "merged"


class EffectKind(str, Enum):
    general_positive = "general-positive"
    projector = "projector"


class SolverType(str, Enum):
    clarabel = "clarabel"
    scs = "scs"


class OutputFormat(str, Enum):
    json = "json"
    csv = "csv"


class Tolerances(BaseModel):
    hermitian: float = 1e-10
    unit_norm: float = 1e-10
    psd: float = 1e-9
    projector: float = 1e-8
    completeness: float = 1e-8
    unit_trace: float = 1e-9
    fixture: float = 1e-3
    # Largest change allowed when projecting rounded fixture effects onto valid POVMs.
    fixture_repair: float = 5e-2
    moment_psd: float = 1e-8
    moment_normalization: float = 1e-10
    orthonormal: float = 1e-8
    gram_schmidt_residual: float = 1e-7
    solver_feasibility: float = 1e-7
    near_optimal: float = 1e-6
    sweep_monotonicity: float = 1e-7
    # Relative eigenvalue cut for the common range of a moment span.
    facial_reduction: float = 1e-9

    class Config:
        frozen = True


# Every numerical module reads its tolerances from here.
TOLERANCES = Tolerances()


def _env_float(name: str, default: float) -> float:
    value = os.environ.get(name)
    return float(value) if value else default


def _env_int(name: str, default: int) -> int:
    value = os.environ.get(name)
    return int(value) if value else default


def default_jobs() -> int:
    return _env_int("BELLBOUND_JOBS", os.cpu_count() or 1)


class SiteSpec(BaseModel):
    name: str
    dim: int = Field(ge=2)


class ScenarioSpec(BaseModel):
    sites: List[SiteSpec]
    inequality: InequalityType = InequalityType.J
    d: int = Field(default=2, ge=2)
    # Settings per party; the J and K templates use m = 2.
    m: int = Field(default=2, ge=2)
    sign_last_term: int = 1
    # Block weights, e.g. [2, 1] for 2 I^{A|B} + I^{A|C}.
    weights: Optional[List[float]] = None

    class Config:
        use_enum_values = True

    @classmethod
    def from_dims(
        cls,
        inequality: str,
        d: int,
        dims: Tuple[int, ...],
        m: int = 2,
        sign_last_term: int = 1,
        weights: Optional[List[float]] = None,
    ) -> "ScenarioSpec":
        names = ["A", "B", "C"][: len(dims)]
        return cls(
            sites=[SiteSpec(name=n, dim=k) for n, k in zip(names, dims)],
            inequality=inequality,
            d=d,
            m=m,
            sign_last_term=sign_last_term,
            weights=weights,
        )

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(site.dim for site in self.sites)


class SolverSettings(BaseModel):
    type: SolverType = Field(
        default_factory=lambda: os.environ.get("BELLBOUND_SOLVER", "clarabel")
    )
    tol: float = Field(
        default_factory=lambda: _env_float("BELLBOUND_SOLVER_TOL", 1e-8)
    )
    max_iter: int = 500
    # Backend retried when the first one fails outright; empty disables it.
    fallback: Optional[SolverType] = Field(
        default_factory=lambda: os.environ.get("BELLBOUND_SOLVER_FALLBACK", "scs") or None
    )
    verbose: bool = False

    class Config:
        use_enum_values = True


class SeesawSettings(BaseModel):
    restarts: int = Field(default=20, ge=1)
    max_sweeps: int = Field(default=200, ge=1)
    convergence_tol: float = 1e-9
    # Consecutive sweeps below convergence_tol before stopping.
    patience: int = 10
    effect_kind: EffectKind = EffectKind.general_positive
    seed: int = 0
    # Names of the symbols in group X; None means all of Alice's symbols.
    group_split: Optional[List[str]] = None
    pin_slack: float = 1e-6
    pin_weight: float = 10.0
    # The warm-up weight is multiplied by 4 after each attempt that misses the pin.
    pin_escalations: int = 6
    warmup_sweeps: int = 200
    # Wall-clock seconds for all restarts; None means unlimited.
    time_budget: Optional[float] = None
    # Dichotomic effect steps without a pin use the exact eigenprojector optimum.
    closed_form_dichotomic: bool = True
    jobs: int = Field(default_factory=default_jobs, ge=1)

    class Config:
        use_enum_values = True


class MomentSettings(BaseModel):
    degree: int = Field(default=2, ge=1)
    rank_mode: RankMode = RankMode.merged
    stabilization: int = Field(default=25, ge=1)
    max_samples: int = 100_000
    residual_tol: float = 1e-7
    symmetrize: bool = True
    seed: int = 0
    # mode=pruned: allowed ranks per symbol name.
    rank_restrictions: Dict[str, List[int]] = {}
    # Party patterns such as "AAA" or "ABC"; every word with those letters joins the basis.
    extra_words: List[str] = []
    # Solve only classes without rank-0 or full-rank projectors and bound the rest
    # by one classical block plus quantum blocks.
    cap_deterministic: bool = False
    cache_path: Optional[str] = None
    jobs: int = Field(default_factory=default_jobs, ge=1)

    class Config:
        use_enum_values = True


class BoundJob(BaseModel):
    name: str
    inequality: InequalityType = InequalityType.J
    d: int = 2
    m: int = 2
    dims: Optional[List[int]] = None
    sign_last_term: int = 1
    weights: Optional[List[float]] = None
    method: Method = Method.seesaw
    seesaw: SeesawSettings = SeesawSettings()
    moment: MomentSettings = MomentSettings()
    solver: SolverSettings = Field(default_factory=SolverSettings)
    pin_j: Optional[float] = None
    # Block label -> pinned value, e.g. {"A|B": 1.7071}.
    pin_blocks: Dict[str, float] = {}
    # Upper bound used for the J part of a K split bound, skips the relaxation.
    j_upper_bound: Optional[float] = None
    max_assignments: int = 10**7
    # method=evaluate: strategy file, optionally lifted to K by reusing A|B or A|C.
    fixture: Optional[str] = None
    reuse_for_dave: Optional[str] = None
    description: Optional[str] = None

    class Config:
        use_enum_values = True

    def scenario_spec(self) -> ScenarioSpec:
        if self.dims:
            dims = tuple(self.dims)
        elif self.inequality == InequalityType.satwap:
            dims = (self.d, self.d)
        else:
            dims = (self.d, self.d, self.d)
        return ScenarioSpec.from_dims(
            self.inequality,
            self.d,
            dims,
            m=self.m,
            sign_last_term=self.sign_last_term,
            weights=self.weights,
        )


class BaseConfig(BaseModel):
    version: Optional[Version] = Version.v1
    jobs: List[BoundJob]
    includes: Optional[List[str]] = None
    store: Optional[str] = "./bellbound.db"


class RunRecord(BaseModel):
    schema_version: str = Field(default="1", alias="schema")
    run_id: str
    name: str
    scenario: ScenarioSpec
    method: Method
    config: Dict[str, Any] = {}
    value: Optional[float] = None
    per_block: Dict[str, float] = {}
    wall_time: float = 0.0
    seed: Optional[int] = None
    version: str
    complete: bool = True
    notes: List[str] = []
    extras: Dict[str, Any] = {}

    class Config:
        use_enum_values = True
        populate_by_name = True


class BoundReport(BaseModel):
    value: Optional[float] = None
    method: Method = Method.moment
    class_values: Dict[str, Optional[float]] = {}
    basis_ranks: Dict[str, int] = {}
    classes_solved: int = 0
    classes_skipped: int = 0
    argmax_class: Optional[str] = None
    complete: bool = True
    # At least one class was only solved to near-optimal accuracy.
    near_optimal: bool = False
    # Backend that produced each class value.
    backends: Dict[str, str] = {}
    # Size of the PSD block after restricting to the common range of the span.
    face_dims: Dict[str, int] = {}
    deterministic_cap: Optional[float] = None
    notes: List[str] = []

    class Config:
        use_enum_values = True
