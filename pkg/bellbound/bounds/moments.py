"""Upper bounds from moment matrices sampled at fixed local dimensions.

Words are products of the first effect of each dichotomic measurement. For
every rank class the moment matrices M_pq = <psi| p^dagger q |psi> of random
realizations are accumulated into an orthonormal basis until the span stops
growing; the bound maximizes the objective over PSD matrices in that span with
M[0, 0] = 1. The sampled matrices share a kernel, so the SDP is posed on their
common range.
"""

import itertools
import json

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pydantic import BaseModel
from rich.console import Console
from scipy import linalg

from bellbound.errors import (
    AsymmetricScenario,
    BudgetExceeded,
    ObjectiveNotRepresentable,
    RankOutOfRange,
    UnsupportedOutcomes,
    UsageError,
)
from bellbound.inequalities.base import BellFunctional
from bellbound.inequalities.satwap import classical_bound_formula, quantum_bound
from bellbound.loader.models import (
    TOLERANCES,
    BoundReport,
    InequalityType,
    Method,
    MomentSettings,
    RankMode,
    SolverSettings,
)
from bellbound.quantum.core import as_rng, haar_projector, hermitian_part, random_pure_state
from bellbound.scenario.base import Scenario
from bellbound.solvers import (
    ConicProblem,
    LinearConstraint,
    SdpSolution,
    Sense,
    SolutionStatus,
    SolverFactory,
)


console = Console()

Word = Tuple[int, ...]


def canonical_form(word: Sequence[int], scenario: Scenario) -> Word:
    """Lexicographically smallest rewriting under commutation and idempotency.

    Letters are symbol indices. A letter may move left past letters it
    commutes with; x u x collapses to x u when x commutes with every letter of u.
    """
    symbols = scenario.symbols
    commute = lambda i, j: scenario.commute(symbols[i], symbols[j])
    word = tuple(word)
    while True:
        # Greedy lexicographic normal form of the partially commutative word.
        remaining, normal = list(word), []
        while remaining:
            best = None
            for j, letter in enumerate(remaining):
                if all(commute(remaining[i], letter) for i in range(j)):
                    if best is None or letter < remaining[best]:
                        best = j
            normal.append(remaining.pop(best))
        collapsed = _collapse(normal, commute)
        if tuple(collapsed) == word:
            return word
        word = tuple(collapsed)


def _collapse(word: List[int], commute) -> List[int]:
    for i, letter in enumerate(word):
        for j in range(i + 1, len(word)):
            if word[j] == letter:
                return word[:j] + word[j + 1 :]
            if not commute(letter, word[j]):
                break
    return word


class MonomialBasis(BaseModel):
    words: Tuple[Word, ...]
    degree: int
    patterns: Tuple[str, ...] = ()

    class Config:
        frozen = True

    def index(self, word: Word) -> int:
        return self.words.index(word)


def _check_dichotomic(scenario: Scenario):
    wide = [s.name for s in scenario.symbols if s.outcomes != 2]
    if wide:
        raise UnsupportedOutcomes(
            f"The moment relaxation handles two-outcome measurements only; {wide} have more"
        )


def normalize_patterns(patterns: Optional[Sequence[str]]) -> Tuple[str, ...]:
    return tuple(sorted({p.strip().upper() for p in patterns or [] if p.strip()}))


def pattern_words(scenario: Scenario, pattern: str) -> List[Word]:
    """Canonical words whose i-th letter belongs to party ``pattern[i]``."""
    parties = [s.party for s in scenario.symbols]
    missing = sorted(set(pattern) - set(parties))
    if missing:
        raise UsageError(f"Pattern {pattern} names parties {missing} absent from the scenario")
    pools = [[i for i, p in enumerate(parties) if p == letter] for letter in pattern]
    return [canonical_form(word, scenario) for word in itertools.product(*pools)]


def generate_monomials(
    scenario: Scenario, degree: int, patterns: Optional[Sequence[str]] = None
) -> MonomialBasis:
    """All words up to ``degree``, plus the words of every party pattern (e.g. "AAA", "ABC")."""
    if degree < 0:
        raise UsageError(f"Degree must be non-negative, got {degree}")
    patterns = normalize_patterns(patterns)
    letters = range(len(scenario.symbols))
    words = {()}
    for length in range(1, degree + 1):
        for word in itertools.product(letters, repeat=length):
            words.add(canonical_form(word, scenario))
    for pattern in patterns:
        words.update(pattern_words(scenario, pattern))
    ordered = sorted(words, key=lambda w: (len(w), w))
    return MonomialBasis(words=tuple(ordered), degree=degree, patterns=patterns)


class RankClass(BaseModel):
    # Rank of the first effect per symbol, in scenario order; None when merged.
    ranks: Optional[Tuple[int, ...]] = None
    merged: bool = False

    class Config:
        frozen = True

    @property
    def label(self) -> str:
        return "merged" if self.merged else "".join(str(r) for r in self.ranks)

    def validate_for(self, scenario: Scenario) -> "RankClass":
        if self.merged:
            return self
        if len(self.ranks) != len(scenario.symbols):
            raise RankOutOfRange(f"Rank class {self.label} has the wrong length")
        for r, s in zip(self.ranks, scenario.symbols):
            if r < 0 or r > scenario.support_dim(s):
                raise RankOutOfRange(f"Rank {r} out of range for {s.name}")
        return self


@dataclass
class MomentMatrixSample:
    matrix: np.ndarray
    seed: int
    rank_class: RankClass


def _realization(scenario: Scenario, rc: RankClass, rng) -> List[np.ndarray]:
    projectors = []
    for i, symbol in enumerate(scenario.symbols):
        dim = scenario.support_dim(symbol)
        rank = int(rng.integers(0, dim + 1)) if rc.merged else rc.ranks[i]
        projectors.append(scenario.embed(haar_projector(dim, rank, rng).matrix, symbol))
    return projectors


def _moment_matrix(projectors, basis: MonomialBasis, ket: np.ndarray) -> np.ndarray:
    columns = []
    for word in basis.words:
        v = ket
        for letter in reversed(word):
            v = projectors[letter] @ v
        columns.append(v)
    v = np.column_stack(columns)
    return v.conj().T @ v


def sample_moment_matrix(
    scenario: Scenario, basis: MonomialBasis, rc: RankClass, seed=None
) -> MomentMatrixSample:
    rng = as_rng(seed)
    projectors = _realization(scenario, rc.validate_for(scenario), rng)
    ket = random_pure_state(scenario.layout.total_dim, rng)
    return MomentMatrixSample(
        _moment_matrix(projectors, basis, ket),
        seed if isinstance(seed, int) else -1,
        rc,
    )


def to_real_vector(m: np.ndarray) -> np.ndarray:
    return np.concatenate([np.real(m).ravel(), np.imag(m).ravel()])


def from_real_vector(v: np.ndarray, n: int) -> np.ndarray:
    return v[: n * n].reshape(n, n) + 1j * v[n * n :].reshape(n, n)


class GramSchmidt:
    """Orthonormal set grown one vector at a time, with one reorthogonalization pass."""

    def __init__(self, dim: int, residual_tol: float = TOLERANCES.gram_schmidt_residual):
        # Rows beyond self.n are spare capacity.
        self._rows = np.zeros((16, dim))
        self._n = 0
        self.residual_tol = residual_tol

    @property
    def V(self) -> np.ndarray:
        return self._rows[: self._n]

    @property
    def n(self) -> int:
        return self._n

    def _push(self, row: np.ndarray):
        if self._n == self._rows.shape[0]:
            self._rows = np.vstack([self._rows, np.zeros_like(self._rows)])
        self._rows[self._n] = row
        self._n += 1

    def orthogonalize_vector(self, d: np.ndarray) -> np.ndarray:
        for _ in range(2):
            d = d - self.V.T @ (self.V @ d)
        return d

    def append(self, d: np.ndarray) -> bool:
        """Adds the normalized residual of ``d``; False when ``d`` is already spanned."""
        norm = np.linalg.norm(d)
        if norm == 0:
            return False
        residual = self.orthogonalize_vector(d)
        if np.linalg.norm(residual) <= self.residual_tol * norm:
            return False
        self._push(residual / np.linalg.norm(residual))
        return True


@dataclass
class MomentBasis:
    vectors: np.ndarray
    size: int
    stabilization_counter: int = 0
    samples: int = 0

    @property
    def rank(self) -> int:
        return self.vectors.shape[0]

    def matrices(self) -> List[np.ndarray]:
        return [from_real_vector(v, self.size) for v in self.vectors]

    def residual(self, m: np.ndarray) -> float:
        v = to_real_vector(m)
        r = v - self.vectors.T @ (self.vectors @ v)
        return float(np.linalg.norm(r))


def swap_permutation(scenario: Scenario, basis: MonomialBasis) -> np.ndarray:
    """Index permutation of the monomial basis induced by the B <-> C swap."""
    mapping = scenario.swap_map()
    letters = [scenario.names.index(mapping[name]) for name in scenario.names]
    return np.array(
        [
            basis.index(canonical_form(tuple(letters[x] for x in word), scenario))
            for word in basis.words
        ]
    )


def symmetrize(
    item: Union[np.ndarray, MomentBasis], permutation: np.ndarray
) -> Union[np.ndarray, MomentBasis]:
    """Average with the image under the word permutation; a basis is re-orthonormalized."""
    if isinstance(item, np.ndarray):
        return (item + item[np.ix_(permutation, permutation)]) / 2
    gs = GramSchmidt(item.vectors.shape[1])
    for m in item.matrices():
        gs.append(to_real_vector(symmetrize(m, permutation)))
    return MomentBasis(gs.V.copy(), item.size, item.stabilization_counter, item.samples)


def build_basis(
    scenario: Scenario,
    basis: MonomialBasis,
    rc: RankClass,
    stabilization: int = 25,
    seed=None,
    max_samples: int = 100_000,
    residual_tol: float = TOLERANCES.gram_schmidt_residual,
    permutation: Optional[np.ndarray] = None,
) -> MomentBasis:
    """Samples until ``stabilization`` consecutive samples add nothing to the span."""
    if stabilization < 1:
        raise UsageError(f"stabilization must be at least 1, got {stabilization}")
    rng = as_rng(seed)
    rc = rc.validate_for(scenario)
    n = len(basis.words)
    gs = GramSchmidt(2 * n * n, residual_tol)
    streak, drawn = 0, 0
    while streak < stabilization:
        if drawn >= max_samples:
            raise BudgetExceeded(
                f"Span of class {rc.label} did not stabilize after {max_samples} samples"
            )
        m = _moment_matrix(
            _realization(scenario, rc, rng),
            basis,
            random_pure_state(scenario.layout.total_dim, rng),
        )
        if permutation is not None:
            m = symmetrize(m, permutation)
        drawn += 1
        streak = 0 if gs.append(to_real_vector(m)) else streak + 1
    return MomentBasis(gs.V.copy(), n, streak, drawn)


def enumerate_rank_classes(
    scenario: Scenario,
    mode: RankMode = RankMode.merged,
    restrictions: Optional[Dict[str, List[int]]] = None,
    symmetric: bool = True,
    interior: bool = False,
) -> List[RankClass]:
    """Rank classes to sample; ``interior`` drops rank 0 and full rank for every symbol."""
    _check_dichotomic(scenario)
    if mode == RankMode.merged:
        if interior:
            raise UsageError("Dropping deterministic classes needs rank_mode all or pruned")
        return [RankClass(merged=True)]
    ranges = []
    for symbol in scenario.symbols:
        dim = scenario.support_dim(symbol)
        full = list(range(dim + 1))
        if mode == RankMode.pruned and restrictions and symbol.name in restrictions:
            allowed = sorted(set(restrictions[symbol.name]))
            if any(r not in full for r in allowed):
                raise RankOutOfRange(f"Restricted ranks {allowed} out of range for {symbol.name}")
            full = allowed
        if interior:
            full = [r for r in full if 0 < r < dim]
            if not full:
                raise RankOutOfRange(f"No rank strictly between 0 and {dim} left for {symbol.name}")
        ranges.append(full)
    classes = [tuple(r) for r in itertools.product(*ranges)]
    mapping = None
    if symmetric:
        try:
            mapping = scenario.swap_map()
        except AsymmetricScenario:
            mapping = None
    if mapping is not None:
        position = [scenario.names.index(mapping[name]) for name in scenario.names]
        # Only rank sets that the B <-> C swap maps onto themselves can be folded.
        if all(ranges[position[i]] == ranges[i] for i in range(len(ranges))):
            representatives = set()
            for ranks in classes:
                image = [0] * len(ranks)
                for i, r in enumerate(ranks):
                    image[position[i]] = r
                representatives.add(min(ranks, tuple(image)))
            classes = sorted(representatives)
    return [RankClass(ranks=r) for r in classes]


def deterministic_cap(f: BellFunctional) -> float:
    """Bound on every class with a rank-0 or full-rank projector.

    Such a projector is a deterministic measurement, so its block is local and
    stays below the classical value while the other blocks stay below the quantum one.
    """
    scenario = f.scenario
    if scenario.inequality not in (InequalityType.J.value, InequalityType.satwap.value):
        raise UsageError(f"No deterministic cap for {scenario.inequality} functionals")
    weights = [f.weight(b) for b in f.blocks]
    if any(w < 0 for w in weights):
        raise UsageError("The deterministic cap needs non-negative block weights")
    classical = classical_bound_formula(scenario.m, scenario.d)
    quantum = quantum_bound(scenario.m, scenario.d)
    total = sum(weights) * quantum
    return f.constant_offset + max(total - w * (quantum - classical) for w in weights)


def _term_words(left: int, right: int, a: int, b: int, scenario: Scenario):
    """p(left = a, right = b) as coefficients of (), (left), (right), (left right)."""
    cl, pl = (0.0, 1.0) if a == 0 else (1.0, -1.0)
    cr, pr = (0.0, 1.0) if b == 0 else (1.0, -1.0)
    return [
        ((), cl * cr),
        ((left,), pl * cr),
        ((right,), cl * pr),
        (canonical_form((left, right), scenario), pl * pr),
    ]


def objective_matrix(f: BellFunctional, basis: MonomialBasis) -> np.ndarray:
    """Real symmetric W with <W, M> equal to the functional's value on moment matrix M."""
    scenario = f.scenario
    _check_dichotomic(scenario)
    n = len(basis.words)
    w = np.zeros((n, n))
    names = scenario.names
    location = {(): (0, 0)}
    for i in range(len(names)):
        if (i,) in basis.words:
            location[(i,)] = (0, basis.index((i,)))

    def locate(word):
        if word in location:
            return location[word]
        if len(word) == 2 and (word[0],) in basis.words and (word[1],) in basis.words:
            return basis.index((word[0],)), basis.index((word[1],))
        raise ObjectiveNotRepresentable(
            f"Word {[names[i] for i in word]} is not in the degree {basis.degree} basis"
        )

    constant = f.constant_offset + sum(f.weight(b) * o for b, o in f.offsets.items())
    w[0, 0] += constant
    for term in f.terms:
        left, right = names.index(term.left), names.index(term.right)
        scale = f.weight(term.block) * term.coefficient
        for b in range(2):
            a = (b + term.shift) % 2
            for word, coefficient in _term_words(left, right, a, b, scenario):
                if coefficient == 0:
                    continue
                p, q = locate(word)
                w[p, q] += scale * coefficient / 2
                w[q, p] += scale * coefficient / 2
    return w


def common_range(
    matrices: Sequence[np.ndarray], tol: float = TOLERANCES.facial_reduction
) -> np.ndarray:
    """Orthonormal columns spanning the sum of the ranges of Hermitian ``matrices``."""
    gram = sum(m @ m.conj().T for m in matrices)
    values, vectors = linalg.eigh(hermitian_part(gram))
    keep = values > tol * max(values[-1], 0.0)
    return vectors[:, keep]


def solve_over_span(
    w: np.ndarray, moment_basis: MomentBasis, solver_settings: Optional[SolverSettings] = None
) -> Tuple[SdpSolution, int]:
    """Maximizes <w, M> over PSD M in the span with M[0, 0] = 1; returns the face size too.

    Every M in the span satisfies M = P M P for the projector P onto the common
    range, so the PSD block is posed on that range only.
    """
    matrices = moment_basis.matrices()
    if not matrices:
        raise BudgetExceeded("The moment span is empty")
    face = common_range(matrices)
    reduce = lambda m: face.conj().T @ m @ face
    r = face.shape[1]
    normalization = np.zeros(w.shape)
    normalization[0, 0] = 1
    problem = ConicProblem(
        anchors=[np.zeros((r, r), dtype=complex)],
        basis=[[reduce(m)] for m in matrices],
        objective=[reduce(w.astype(complex))],
        extra_linear=[LinearConstraint([reduce(normalization.astype(complex))], 1.0, Sense.eq)],
    )
    return SolverFactory.create_solver(solver_settings).solve(problem), r


@dataclass
class ClassOutcome:
    value: Optional[float]
    status: SolutionStatus
    vectors: Optional[np.ndarray] = None
    note: Optional[str] = None
    backend: Optional[str] = None
    face_dim: Optional[int] = None


def class_seed(seed: int, rc: RankClass) -> np.random.Generator:
    return np.random.default_rng([seed, *(rc.ranks or ())])


def _solve_class(scenario, f, basis, rc, cfg, solver_settings, cached, permutation) -> ClassOutcome:
    try:
        if cached is None:
            moment_basis = build_basis(
                scenario,
                basis,
                rc,
                cfg.stabilization,
                class_seed(cfg.seed, rc),
                cfg.max_samples,
                cfg.residual_tol,
                permutation,
            )
        else:
            moment_basis = MomentBasis(cached, len(basis.words))
        w = objective_matrix(f, basis)
        solution, face_dim = solve_over_span(w, moment_basis, solver_settings)
    except BudgetExceeded as e:
        return ClassOutcome(None, SolutionStatus.failed, note=str(e))
    outcome = ClassOutcome(
        solution.value if solution.usable else None,
        solution.status,
        moment_basis.vectors,
        backend=solution.backend,
        face_dim=face_dim,
    )
    if not solution.usable:
        outcome.note = f"class {rc.label}: {solution.status.value} ({solution.backend})"
    return outcome


def _swap_invariant(f: BellFunctional, basis: MonomialBasis, permutation: np.ndarray) -> bool:
    w = objective_matrix(f, basis)
    return bool(np.allclose(w, w[np.ix_(permutation, permutation)], atol=1e-12))


def basis_settings(cfg: MomentSettings) -> str:
    """Cache key for a sampled span: everything that changes which vectors get drawn."""
    return json.dumps(
        {
            "degree": cfg.degree,
            "extra_words": list(normalize_patterns(cfg.extra_words)),
            "symmetrize": cfg.symmetrize,
            "seed": cfg.seed,
            "stabilization": cfg.stabilization,
            "residual_tol": cfg.residual_tol,
        },
        sort_keys=True,
    )


def upper_bound(
    scenario: Scenario,
    f: BellFunctional,
    cfg: Optional[MomentSettings] = None,
    solver_settings: Optional[SolverSettings] = None,
    store=None,
    verbose: bool = False,
) -> BoundReport:
    """Max over rank classes of the relaxation value, or the merged-span value."""
    cfg = cfg if cfg else MomentSettings()
    _check_dichotomic(scenario)
    if f.scenario != scenario:
        raise UsageError("Functional and scenario do not match")
    basis = generate_monomials(scenario, cfg.degree, cfg.extra_words)
    objective_matrix(f, basis)
    permutation = None
    if cfg.symmetrize:
        permutation = swap_permutation(scenario, basis)
        if not _swap_invariant(f, basis, permutation):
            raise AsymmetricScenario(
                "The functional is not invariant under B <-> C; run without symmetrization"
            )
    cap = deterministic_cap(f) if cfg.cap_deterministic else None
    classes = enumerate_rank_classes(
        scenario,
        cfg.rank_mode,
        cfg.rank_restrictions,
        symmetric=cfg.symmetrize,
        interior=cfg.cap_deterministic,
    )
    key = basis_settings(cfg)
    cached = [
        store.load_basis(scenario.digest(), rc.label, key) if store is not None else None
        for rc in classes
    ]
    args = [
        (scenario, f, basis, rc, cfg, solver_settings, cached[i], permutation)
        for i, rc in enumerate(classes)
    ]
    if cfg.jobs > 1 and len(classes) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            outputs = list(pool.map(_solve_class, *zip(*args)))
    else:
        outputs = []
        for a in args:
            outputs.append(_solve_class(*a))
            if verbose:
                console.print(f"  class {a[3].label}: {outputs[-1].value}")
    report = BoundReport(method=Method.moment, deterministic_cap=cap)
    for rc, hit, outcome in zip(classes, cached, outputs):
        report.class_values[rc.label] = outcome.value
        if outcome.vectors is not None:
            report.basis_ranks[rc.label] = int(outcome.vectors.shape[0])
            if store is not None and hit is None:
                store.save_basis(
                    scenario.digest(), scenario.layout.dims, rc.label, key, outcome.vectors
                )
        if outcome.backend:
            report.backends[rc.label] = outcome.backend
        if outcome.face_dim is not None:
            report.face_dims[rc.label] = outcome.face_dim
        if outcome.note:
            report.notes.append(outcome.note)
        if outcome.value is None:
            report.classes_skipped += 1
            continue
        report.classes_solved += 1
        report.near_optimal = report.near_optimal or outcome.status == SolutionStatus.near_optimal
        if report.value is None or outcome.value > report.value:
            report.value = outcome.value
            report.argmax_class = rc.label
    if cap is not None and report.value is not None and cap > report.value:
        report.value = cap
        report.argmax_class = "deterministic"
    report.complete = report.classes_skipped == 0
    return report
