import hashlib
import json

from itertools import combinations
from typing import Dict, List, Tuple

import numpy as np

from pydantic import BaseModel

from bellbound.errors import AsymmetricScenario, DimensionMismatch, ScenarioMismatch
from bellbound.quantum.core import tensor


class SiteLayout(BaseModel):
    names: Tuple[str, ...]
    dims: Tuple[int, ...]

    class Config:
        frozen = True

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, site: str) -> int:
        if site not in self.names:
            raise ScenarioMismatch(f"Unknown site {site}, layout has {self.names}")
        return self.names.index(site)

    def dim_of(self, support: Tuple[str, ...]) -> int:
        return int(np.prod([self.dims[self.index(s)] for s in support]))

    def ordered(self, support) -> Tuple[str, ...]:
        return tuple(sorted(support, key=self.index))


class MeasurementSymbol(BaseModel):
    party: str
    partition: str
    setting: int
    outcomes: int
    support: Tuple[str, ...]

    class Config:
        frozen = True

    @property
    def name(self) -> str:
        return f"{self.party}{self.setting}^{self.partition}"

    def __str__(self) -> str:
        return self.name


class Scenario(BaseModel):
    """Sites, measurement symbols and the commutation relation they imply.

    Two symbols commute exactly when their supports are disjoint; symbols
    sharing a site (Alice's partitions, Dave against Bob or Charlie) do not.
    """

    layout: SiteLayout
    symbols: Tuple[MeasurementSymbol, ...]
    inequality: str = "J"
    d: int = 2
    m: int = 2
    sign_last_term: int = 1

    class Config:
        frozen = True

    @property
    def names(self) -> List[str]:
        return [s.name for s in self.symbols]

    @property
    def blocks(self) -> List[str]:
        seen = []
        for s in self.symbols:
            if s.partition not in seen:
                seen.append(s.partition)
        return seen

    def symbol(self, name: str) -> MeasurementSymbol:
        for s in self.symbols:
            if s.name == name:
                return s
        raise ScenarioMismatch(f"Symbol {name} is not part of the scenario")

    def order(self, symbol: MeasurementSymbol) -> int:
        return self.symbols.index(symbol)

    def commute(self, s: MeasurementSymbol, t: MeasurementSymbol) -> bool:
        if s == t:
            return False
        return not set(s.support) & set(t.support)

    def commuting_pairs(self) -> List[Tuple[MeasurementSymbol, MeasurementSymbol]]:
        return [(s, t) for s, t in combinations(self.symbols, 2) if self.commute(s, t)]

    def support_dim(self, symbol: MeasurementSymbol) -> int:
        return self.layout.dim_of(symbol.support)

    def symbols_of(self, partition: str) -> List[MeasurementSymbol]:
        return [s for s in self.symbols if s.partition == partition]

    def embed(self, matrix: np.ndarray, symbol: MeasurementSymbol) -> np.ndarray:
        return embed(matrix, symbol.support, self.layout)

    def swap_map(self) -> Dict[str, str]:
        """Symbol renaming induced by exchanging sites B and C."""
        if "B" not in self.layout.names or "C" not in self.layout.names:
            raise AsymmetricScenario("B<->C swap needs both sites B and C")
        if self.layout.dims[self.layout.index("B")] != self.layout.dims[
            self.layout.index("C")
        ]:
            raise AsymmetricScenario(
                f"B<->C swap needs d_B = d_C, layout has dims {self.layout.dims}"
            )
        letters = {"B": "C", "C": "B"}
        mapping = {}
        for s in self.symbols:
            image = MeasurementSymbol(
                party=letters.get(s.party, s.party),
                partition="".join(letters.get(c, c) for c in s.partition),
                setting=s.setting,
                outcomes=s.outcomes,
                support=self.layout.ordered(letters.get(c, c) for c in s.support),
            )
            # A|BC maps to A|CB, which is the same block.
            if image.partition == "A|CB":
                image = image.model_copy(update={"partition": "A|BC"})
            if image not in self.symbols:
                raise AsymmetricScenario(f"Symbol {s.name} has no image under B<->C")
            mapping[s.name] = image.name
        return mapping

    def swap_operator(self) -> np.ndarray:
        """Permutation matrix exchanging the B and C tensor factors."""
        self.swap_map()
        return factor_swap(
            self.layout.dims, self.layout.index("B"), self.layout.index("C")
        )

    def digest(self) -> str:
        payload = json.dumps(self.model_dump(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


def embed(
    matrix: np.ndarray, support: Tuple[str, ...], layout: SiteLayout
) -> np.ndarray:
    """Places an operator on ``support`` and the identity on every other site."""
    support = layout.ordered(support)
    expected = layout.dim_of(support)
    if matrix.shape != (expected, expected):
        raise DimensionMismatch(
            f"Operator of shape {matrix.shape} does not fit support {support} "
            f"of dimension {expected}"
        )
    rest = [n for n in layout.names if n not in support]
    rest_dim = layout.dim_of(tuple(rest)) if rest else 1
    op = tensor(matrix, np.eye(rest_dim))
    order = list(support) + rest
    if order == list(layout.names):
        return op
    dims = [layout.dims[layout.index(n)] for n in order]
    k = len(dims)
    # Reorder tensor factors from (support, rest) to layout order.
    perm = [order.index(n) for n in layout.names]
    op = op.reshape(dims + dims).transpose(perm + [p + k for p in perm])
    total = layout.total_dim
    return op.reshape(total, total)


def layout_from(names: Tuple[str, ...], dims: Tuple[int, ...]) -> SiteLayout:
    if len(names) != len(dims):
        raise DimensionMismatch(f"{len(names)} sites but {len(dims)} dimensions")
    return SiteLayout(names=tuple(names), dims=tuple(int(d) for d in dims))


def factor_swap(dims: Tuple[int, ...], i: int, j: int) -> np.ndarray:
    """Permutation matrix exchanging tensor factors ``i`` and ``j`` of equal size."""
    dims = list(dims)
    axes = list(range(len(dims)))
    axes[i], axes[j] = axes[j], axes[i]
    n = int(np.prod(dims))
    identity = np.eye(n).reshape(dims + [n])
    return identity.transpose(axes + [len(dims)]).reshape(n, n)
