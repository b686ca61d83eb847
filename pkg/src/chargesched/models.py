"""Stochastic scenario definition: grid kernel, charging cost, demand chain,
arrival law, admission, and the scenario JSON schema.

Kernels and tabulated arrival probabilities are stored as exact Fractions
(decimal input is validated to 1e-12 row sums and converted); every sampler
consumes a fixed, documented number of uniforms from its own substream so that
rollouts sharing a seed can be coupled sample-path by sample-path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import streams
from .core import EMPTY, PenaltyFunction, SystemState, VehicleState

ROW_SUM_TOL = 1e-12


def _to_fraction(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10 ** 15)
    raise TypeError(f"cannot interpret {x!r} as a probability")


def _validate_row(row: Sequence[Fraction], what: str) -> tuple[Fraction, ...]:
    row = tuple(row)
    if any(p < 0 for p in row):
        raise ValueError(f"{what}: negative probability")
    s = sum(row)
    if s != 1 and abs(float(s) - 1.0) > ROW_SUM_TOL:
        raise ValueError(f"{what}: row sums to {float(s)}, not 1")
    if s != 1:
        # Decimal input within tolerance: renormalize exactly on the largest entry.
        k = max(range(len(row)), key=lambda i: row[i])
        row = tuple(p if i != k else p + (1 - s) for i, p in enumerate(row))
    return row


def sample_index(cdf_row: Sequence[float], u: float) -> int:
    """Inverse-CDF draw using exactly one uniform."""
    for i, c in enumerate(cdf_row):
        if u < c:
            return i
    return len(cdf_row) - 1


# ---------------------------------------------------------------------------
# Charging cost functions
# ---------------------------------------------------------------------------

class ChargingCost:
    """Maps (aggregate charge count A, grid state index) to an exact cost."""

    kind = "table"

    def __call__(self, aggregate: int, grid_index: int) -> Fraction:
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class CapacityCost(ChargingCost):
    """Free while A stays within the state's capacity value, a prohibitive
    ceiling otherwise.  The ceiling is the largest penalty the whole fleet
    could ever incur, so no sane policy exceeds capacity."""
    capacities: tuple[int, ...]
    ceiling: Fraction

    kind = "capacity"

    def __call__(self, aggregate: int, grid_index: int) -> Fraction:
        if aggregate <= self.capacities[grid_index]:
            return Fraction(0)
        return self.ceiling

    def to_json(self):
        return "capacity"


@dataclass(frozen=True)
class QuadraticLoadCost(ChargingCost):
    """Generation cost (A + s_value)^2 of the total net load."""
    base_loads: tuple[int, ...]

    kind = "quadratic"

    def __call__(self, aggregate: int, grid_index: int) -> Fraction:
        return Fraction((aggregate + self.base_loads[grid_index]) ** 2)

    def to_json(self):
        return "quadratic"


@dataclass(frozen=True)
class TableCost(ChargingCost):
    """Explicit cost table indexed [A][grid state index]."""
    table: tuple[tuple[Fraction, ...], ...]

    kind = "table"

    def __call__(self, aggregate: int, grid_index: int) -> Fraction:
        return self.table[aggregate][grid_index]

    def to_json(self):
        return [[str(c) if c.denominator != 1 else int(c) for c in row] for row in self.table]


# ---------------------------------------------------------------------------
# Grid model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridModel:
    """Finite grid-state chain whose transitions may depend on the aggregate
    action; ``values`` carries the interpretation of each state (for the
    capacity benchmark, the number of vehicles that can charge for free).

    The iid-uniform special case (next state uniform regardless of the
    current state and action) skips the explicit kernel entirely; the
    benchmark grid has 121 states and hundreds of aggregate levels, and a
    materialized kernel would be millions of identical entries.
    """
    values: tuple[int, ...]
    kernel: tuple[tuple[tuple[Fraction, ...], ...], ...] | None  # [s][A][s']
    cost: ChargingCost
    iid_uniform: bool = False  # transitions ignore (s, A): uniform over states
    _cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = len(self.values)
        if self.iid_uniform:
            object.__setattr__(self, "kernel", None)
            object.__setattr__(self, "_cdf", None)
            return
        if self.kernel is None:
            raise ValueError("non-iid grid requires an explicit kernel")
        if len(self.kernel) != n:
            raise ValueError("kernel first dimension must match state count")
        a_dim = len(self.kernel[0])
        rows = []
        for s, per_action in enumerate(self.kernel):
            if len(per_action) != a_dim:
                raise ValueError("kernel action dimension is ragged")
            for a, row in enumerate(per_action):
                if len(row) != n:
                    raise ValueError("kernel row length must match state count")
                rows.append(_validate_row(row, f"grid kernel row (s={s}, A={a})"))
        fixed = tuple(tuple(rows[s * a_dim + a] for a in range(a_dim)) for s in range(n))
        object.__setattr__(self, "kernel", fixed)
        cdf = np.cumsum(np.array([[list(map(float, r)) for r in pa] for pa in fixed]), axis=2)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def state_count(self) -> int:
        return len(self.values)

    def action_dim_covers(self, n_chargers: int) -> bool:
        if self.iid_uniform:
            return True
        return len(self.kernel[0]) == n_chargers + 1

    def row(self, s: int, aggregate: int) -> tuple[Fraction, ...]:
        if self.iid_uniform:
            p = Fraction(1, self.state_count)
            return tuple(p for _ in range(self.state_count))
        return self.kernel[s][aggregate]

    def special_state(self) -> int | None:
        """A state reachable (under zero aggregate action) from every initial
        state, if one exists: the anchor the constant-gain argument needs."""
        if self.iid_uniform:
            return 0
        n = self.state_count
        reach = []
        for s0 in range(n):
            seen = {s0}
            frontier = [s0]
            while frontier:
                s = frontier.pop()
                for s2, p in enumerate(self.kernel[s][0]):
                    if p > 0 and s2 not in seen:
                        seen.add(s2)
                        frontier.append(s2)
            reach.append(seen)
        common = set.intersection(*reach) if reach else set()
        return min(common) if common else None

    def initial_distribution(self) -> tuple[Fraction, ...]:
        """Stationary distribution of the zero-action chain when it is
        irreducible, else uniform.  Used to draw the starting grid state."""
        if self.iid_uniform:
            return tuple(Fraction(1, self.state_count) for _ in range(self.state_count))
        p0 = [[self.kernel[s][0][s2] for s2 in range(self.state_count)]
              for s in range(self.state_count)]
        pi = _stationary_or_none(p0)
        if pi is None:
            return tuple(Fraction(1, self.state_count) for _ in range(self.state_count))
        return pi


def _stationary_or_none(p: list[list[Fraction]]) -> tuple[Fraction, ...] | None:
    """Exact stationary distribution of an irreducible chain, None otherwise."""
    n = len(p)
    # Irreducibility check by reachability from state 0 in both directions.
    fwd = _closure(p, {0})
    if len(fwd) != n:
        return None
    rev = [[p[j][i] for j in range(n)] for i in range(n)]
    if len(_closure(rev, {0})) != n:
        return None
    from .linalg import stationary_distribution
    return stationary_distribution(p)


def _closure(p: list[list[Fraction]], start: set[int]) -> set[int]:
    seen = set(start)
    frontier = list(start)
    while frontier:
        s = frontier.pop()
        for s2, q in enumerate(p[s]):
            if q > 0 and s2 not in seen:
                seen.add(s2)
                frontier.append(s2)
    return seen


# ---------------------------------------------------------------------------
# Arrival laws and demand model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedCountArrivals:
    """A constant number of arrivals per stage; each arrival independently
    draws a stay uniform on {1..B} and a request uniform on {1..stay}."""
    count: int

    kind = "fixed_count"

    def zero_arrival_probability(self) -> Fraction:
        return Fraction(1) if self.count == 0 else Fraction(0)

    def sample(self, key, traj: int, stage: int, max_stay: int) -> list[VehicleState]:
        if self.count == 0:
            return []
        if self.count > streams.MAX_ARRIVALS_PER_STAGE:
            raise ValueError("arrival count exceeds the per-stage stream capacity")
        u_stay = streams.uniforms(key, traj, stage, streams.STAY, self.count)
        u_req = streams.uniforms(key, traj, stage, streams.REQUEST, self.count)
        stays = (u_stay * max_stay).astype(np.int64) + 1
        reqs = (u_req * stays).astype(np.int64) + 1
        return [VehicleState(int(s), int(r)) for s, r in zip(stays, reqs)]


@dataclass(frozen=True)
class TabulatedArrivals:
    """Explicit joint distribution over whole arrival batches; exact
    probabilities make this the form the DP enumerator requires."""
    outcomes: tuple[tuple[Fraction, tuple[VehicleState, ...]], ...]

    kind = "tabulated"

    def __post_init__(self):
        probs = _validate_row([p for p, _ in self.outcomes], "arrival outcomes")
        object.__setattr__(
            self, "outcomes",
            tuple((p, tuple(v)) for p, (_, v) in zip(probs, self.outcomes)))

    def zero_arrival_probability(self) -> Fraction:
        return sum((p for p, vs in self.outcomes if len(vs) == 0), Fraction(0))

    def sample(self, key, traj: int, stage: int, max_stay: int) -> list[VehicleState]:
        u = streams.uniform(key, traj, stage, streams.OUTCOME)
        cdf = np.cumsum([float(p) for p, _ in self.outcomes])
        return list(self.outcomes[sample_index(cdf, u)][1])


ArrivalLaw = FixedCountArrivals | TabulatedArrivals


@dataclass(frozen=True)
class DemandModel:
    """Demand chain plus the per-state arrival law.  Evolves independently of
    the grid and of actions."""
    kernel: tuple[tuple[Fraction, ...], ...]
    arrivals: tuple[ArrivalLaw, ...]  # one law per demand state

    def __post_init__(self):
        n = len(self.kernel)
        rows = tuple(_validate_row(r, f"demand kernel row {d}") for d, r in enumerate(self.kernel))
        object.__setattr__(self, "kernel", rows)
        if len(self.arrivals) != n:
            raise ValueError("need one arrival law per demand state")

    @property
    def state_count(self) -> int:
        return len(self.kernel)

    def is_ergodic(self) -> bool:
        """Irreducible and aperiodic, decided structurally."""
        n = self.state_count
        p = [list(r) for r in self.kernel]
        if len(_closure(p, {0})) != n:
            return False
        rev = [[p[j][i] for j in range(n)] for i in range(n)]
        if len(_closure(rev, {0})) != n:
            return False
        return _period(p) == 1

    def initial_distribution(self) -> tuple[Fraction, ...]:
        pi = _stationary_or_none([list(r) for r in self.kernel])
        if pi is None:
            return tuple(Fraction(1, self.state_count) for _ in range(self.state_count))
        return pi


def _period(p: list[list[Fraction]]) -> int:
    """Period of an irreducible chain via BFS level differences."""
    import math
    n = len(p)
    level = {0: 0}
    queue = [0]
    g = 0
    while queue:
        s = queue.pop(0)
        for s2, q in enumerate(p[s]):
            if q > 0:
                if s2 in level:
                    g = math.gcd(g, level[s] + 1 - level[s2])
                else:
                    level[s2] = level[s] + 1
                    queue.append(s2)
    return abs(g) if g else n


# ---------------------------------------------------------------------------
# Scenario bundle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioModel:
    """Everything a rollout or DP needs: fleet geometry, grid, demand,
    penalty, and the admission rule."""
    name: str
    num_chargers: int           # N
    max_stay: int               # B
    max_units: int              # E
    grid: GridModel
    demand: DemandModel
    penalty: PenaltyFunction
    admission: str = "lowest-index"
    initial_grid: int | None = None
    initial_demand: int | None = None

    def __post_init__(self):
        if not self.grid.action_dim_covers(self.num_chargers):
            raise ValueError("grid kernel must cover aggregate actions 0..N")
        if self.penalty.max_units != self.max_units:
            raise ValueError("penalty table length must be E + 1")
        if self.admission != "lowest-index":
            raise ValueError(f"unknown admission rule {self.admission!r}")

    def validate_state(self, state: SystemState) -> None:
        if len(state.vehicles) != self.num_chargers:
            raise ValueError("wrong charger count")
        for v in state.vehicles:
            if not (0 <= v.stay <= self.max_stay and 0 <= v.need <= self.max_units):
                raise ValueError(f"vehicle state {v} outside (B, E) bounds")
            if v.stay == 0 and v.need != 0:
                raise ValueError("empty charger sentinel must be (0, 0)")
        if not 0 <= state.grid < self.grid.state_count:
            raise ValueError("grid index out of range")
        if not 0 <= state.demand < self.demand.state_count:
            raise ValueError("demand index out of range")

    def empty_state(self, grid: int, demand: int) -> SystemState:
        return SystemState((EMPTY,) * self.num_chargers, grid, demand)

    def grid_value(self, grid_index: int) -> int:
        return self.grid.values[grid_index]


# ---------------------------------------------------------------------------
# Sampling and admission
# ---------------------------------------------------------------------------

def sample_grid(grid: GridModel, s: int, aggregate: int, key, traj: int, stage: int) -> int:
    """Next grid state; consumes exactly one uniform from the grid substream."""
    u = streams.uniform(key, traj, stage, streams.GRID)
    if grid.iid_uniform:
        return int(u * grid.state_count)
    return sample_index(grid._cdf[s][aggregate], u)


def sample_demand(demand: DemandModel, d: int, key, traj: int, stage: int,
                  max_stay: int) -> tuple[int, list[VehicleState]]:
    """Next demand state and the arrival batch generated while in state d.

    The chain transition consumes one uniform when there is more than one
    demand state and none otherwise; arrival draws come from their own
    substreams so the consumption pattern never depends on the policy.
    """
    if demand.state_count > 1:
        u = streams.uniform(key, traj, stage, streams.DEMAND)
        cdf = np.cumsum([float(p) for p in demand.kernel[d]])
        d_next = sample_index(cdf, u)
    else:
        d_next = d
    arrivals = demand.arrivals[d].sample(key, traj, stage, max_stay)
    return d_next, arrivals


def admit(vehicles: Sequence[VehicleState], arrivals: Sequence[VehicleState]
          ) -> tuple[tuple[VehicleState, ...], int]:
    """Place arrivals on the lowest-index empty chargers in arrival order;
    count and drop the overflow."""
    out = list(vehicles)
    empties = [i for i, v in enumerate(out) if not v.present]
    placed = 0
    for slot, arrival in zip(empties, arrivals):
        out[slot] = arrival
        placed += 1
    return tuple(out), len(arrivals) - placed


def draw_initial(scenario: ScenarioModel, key, traj: int) -> SystemState:
    """All chargers empty; grid/demand drawn from their marginals unless the
    scenario pins them."""
    if scenario.initial_grid is not None:
        s0 = scenario.initial_grid
    elif scenario.grid.iid_uniform:
        u = streams.uniform(key, traj, 0, streams.INIT_GRID)
        s0 = int(u * scenario.grid.state_count)
    else:
        u = streams.uniform(key, traj, 0, streams.INIT_GRID)
        cdf = np.cumsum([float(p) for p in scenario.grid.initial_distribution()])
        s0 = sample_index(cdf, u)
    if scenario.initial_demand is not None:
        d0 = scenario.initial_demand
    else:
        u = streams.uniform(key, traj, 0, streams.INIT_DEMAND)
        cdf = np.cumsum([float(p) for p in scenario.demand.initial_distribution()])
        d0 = sample_index(cdf, u)
    return scenario.empty_state(s0, d0)


# ---------------------------------------------------------------------------
# Scenario builders
# ---------------------------------------------------------------------------

def capacity_scenario(arrival_rate: int, penalty: str | PenaltyFunction = "linear",
                      num_chargers: int = 400, max_stay: int = 10,
                      capacity_range: tuple[int, int] = (40, 160)) -> ScenarioModel:
    """The capacity-limited benchmark: iid uniform charging capacity, zero
    charging cost up to capacity and a fleet-wide penalty ceiling beyond it,
    a constant arrival count per stage with uniform stays and requests."""
    if arrival_rate < 0:
        raise ValueError("arrival rate must be non-negative")
    max_units = max_stay
    q = _resolve_penalty(penalty, max_units)
    lo, hi = capacity_range
    values = tuple(range(lo, hi + 1))
    grid = GridModel(
        values=values, kernel=None,
        cost=CapacityCost(capacities=values,
                          ceiling=Fraction(num_chargers) * q(max_units)),
        iid_uniform=True)
    demand = DemandModel(
        kernel=((Fraction(1),),),
        arrivals=(FixedCountArrivals(arrival_rate),))
    return ScenarioModel(
        name=f"capacity-benchmark-rate{arrival_rate}",
        num_chargers=num_chargers, max_stay=max_stay, max_units=max_units,
        grid=grid, demand=demand, penalty=q)


def two_charger_scenario() -> ScenarioModel:
    """A fully enumerable instance for the exact DP: two chargers, stays and
    requests up to 2, two grid states (one free, one charging at unit price),
    and with probability 1/2 a pair of vehicles (2,1) and (2,2) arrives."""
    q = PenaltyFunction.quadratic(2)
    half = Fraction(1, 2)
    quarter = Fraction(1, 4)
    # Transition rows depend on the aggregate action: heavier charging tilts
    # the grid toward the expensive state.
    rows_by_a = (
        (Fraction(3, 4), quarter),
        (half, half),
        (quarter, Fraction(3, 4)),
    )
    kernel = tuple(tuple(rows_by_a[a] for a in range(3)) for _ in range(2))
    cost_table = tuple(tuple(Fraction(v) for v in row)
                       for row in ((0, 0), (0, 1), (0, 2)))
    grid = GridModel(values=(0, 1), kernel=kernel, cost=TableCost(cost_table))
    demand = DemandModel(
        kernel=((Fraction(1),),),
        arrivals=(TabulatedArrivals((
            (half, ()),
            (half, (VehicleState(2, 1), VehicleState(2, 2))),
        )),))
    return ScenarioModel(
        name="two-charger-exact", num_chargers=2, max_stay=2, max_units=2,
        grid=grid, demand=demand, penalty=q,
        initial_grid=0, initial_demand=0)


def multichain_fixture() -> ScenarioModel:
    """Negative control: two disconnected grid states with different costs and
    no chargers, so the average cost depends on where the chain starts."""
    one = Fraction(1)
    zero = Fraction(0)
    kernel = (((one, zero),), ((zero, one),))
    cost = TableCost(((zero, one),))
    grid = GridModel(values=(0, 1), kernel=kernel, cost=cost)
    demand = DemandModel(kernel=((one,),), arrivals=(TabulatedArrivals(((one, ()),)),))
    return ScenarioModel(
        name="multichain-fixture", num_chargers=0, max_stay=1, max_units=1,
        grid=grid, demand=demand, penalty=PenaltyFunction.linear(1),
        initial_grid=0, initial_demand=0)


def _resolve_penalty(penalty: str | PenaltyFunction, max_units: int) -> PenaltyFunction:
    if isinstance(penalty, PenaltyFunction):
        if penalty.max_units != max_units:
            raise ValueError("penalty table length must be E + 1")
        return penalty
    if penalty == "linear":
        return PenaltyFunction.linear(max_units)
    if penalty == "quadratic":
        return PenaltyFunction.quadratic(max_units)
    raise ValueError(f"unknown penalty kind {penalty!r}")


def with_arrival_rate(scenario: ScenarioModel, rate: int) -> ScenarioModel:
    """Clone a fixed-count scenario with a different arrival rate."""
    arrivals = tuple(
        FixedCountArrivals(rate) if isinstance(law, FixedCountArrivals) else law
        for law in scenario.demand.arrivals)
    demand = DemandModel(kernel=scenario.demand.kernel, arrivals=arrivals)
    return ScenarioModel(
        name=scenario.name, num_chargers=scenario.num_chargers,
        max_stay=scenario.max_stay, max_units=scenario.max_units,
        grid=scenario.grid, demand=demand, penalty=scenario.penalty,
        admission=scenario.admission, initial_grid=scenario.initial_grid,
        initial_demand=scenario.initial_demand)


def with_penalty(scenario: ScenarioModel, penalty: str | PenaltyFunction) -> ScenarioModel:
    """Clone a scenario with a different penalty table (ceiling-based capacity
    costs are rebuilt so the ceiling still bounds the fleet-wide penalty)."""
    q = _resolve_penalty(penalty, scenario.max_units)
    cost = scenario.grid.cost
    if isinstance(cost, CapacityCost):
        cost = CapacityCost(capacities=cost.capacities,
                            ceiling=Fraction(scenario.num_chargers) * q(scenario.max_units))
    grid = GridModel(values=scenario.grid.values, kernel=scenario.grid.kernel,
                     cost=cost, iid_uniform=scenario.grid.iid_uniform)
    return ScenarioModel(
        name=scenario.name, num_chargers=scenario.num_chargers,
        max_stay=scenario.max_stay, max_units=scenario.max_units,
        grid=grid, demand=scenario.demand, penalty=q,
        admission=scenario.admission, initial_grid=scenario.initial_grid,
        initial_demand=scenario.initial_demand)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

def _frac_json(p: Fraction):
    return int(p) if p.denominator == 1 else str(p)


def scenario_to_json(scenario: ScenarioModel) -> dict:
    grid: dict = {"states": list(scenario.grid.values)}
    if scenario.grid.iid_uniform:
        grid["iid_uniform"] = [scenario.grid.values[0], scenario.grid.values[-1]]
    else:
        grid["kernel"] = [[[_frac_json(p) for p in row] for row in pa]
                          for pa in scenario.grid.kernel]
    grid["cost"] = scenario.grid.cost.to_json()

    arrival_laws = []
    for law in scenario.demand.arrivals:
        if isinstance(law, FixedCountArrivals):
            arrival_laws.append({"kind": "fixed_count", "count": law.count})
        else:
            arrival_laws.append({
                "kind": "tabulated",
                "outcomes": [{"prob": _frac_json(p), "vehicles": [[v.stay, v.need] for v in vs]}
                             for p, vs in law.outcomes]})

    q = scenario.penalty.values
    increments = [q[n] - q[n - 1] for n in range(1, len(q))]
    convex = all(d >= 0 for d in increments) and all(
        increments[k] >= increments[k - 1] for k in range(1, len(increments)))
    if q == tuple(Fraction(n) for n in range(len(q))):
        penalty = "linear"
    elif q == tuple(Fraction(n * n) for n in range(len(q))):
        penalty = "quadratic"
    elif convex:
        penalty = [_frac_json(v) for v in q]
    else:
        penalty = {"values": [_frac_json(v) for v in q], "allow_nonconvex": True}

    out = {
        "name": scenario.name,
        "N": scenario.num_chargers,
        "B": scenario.max_stay,
        "E": scenario.max_units,
        "grid": grid,
        "demand": {"states": scenario.demand.state_count,
                   "kernel": [[_frac_json(p) for p in row] for row in scenario.demand.kernel]},
        "arrival": {"per_state": arrival_laws},
        "penalty": penalty,
    }
    if scenario.initial_grid is not None or scenario.initial_demand is not None:
        out["initial"] = {}
        if scenario.initial_grid is not None:
            out["initial"]["grid"] = scenario.initial_grid
        if scenario.initial_demand is not None:
            out["initial"]["demand"] = scenario.initial_demand
    return out


def scenario_from_json(doc: dict) -> ScenarioModel:
    try:
        n = int(doc["N"])
        max_stay = int(doc["B"])
        max_units = int(doc["E"])
        gdoc = doc["grid"]
        ddoc = doc["demand"]
        adoc = doc["arrival"]
        pdoc = doc["penalty"]
    except KeyError as exc:
        raise ValueError(f"scenario JSON missing key {exc}") from None

    if isinstance(pdoc, str):
        penalty = _resolve_penalty(pdoc, max_units)
    elif isinstance(pdoc, dict):
        # Explicit opt-in for negative-control fixtures with non-convex tables.
        penalty = PenaltyFunction([_to_fraction(v) for v in pdoc["values"]],
                                  require_convex=not pdoc.get("allow_nonconvex", False))
    else:
        penalty = PenaltyFunction([_to_fraction(v) for v in pdoc])

    iid = False
    if "iid_uniform" in gdoc:
        lo, hi = gdoc["iid_uniform"]
        values = tuple(range(int(lo), int(hi) + 1))
        kernel = None
        iid = True
    else:
        values = tuple(int(v) for v in gdoc["states"])
        kernel = tuple(
            tuple(tuple(_to_fraction(p) for p in row) for row in pa)
            for pa in gdoc["kernel"])

    cdoc = gdoc["cost"]
    if cdoc == "capacity":
        cost: ChargingCost = CapacityCost(
            capacities=values, ceiling=Fraction(n) * penalty(max_units))
    elif cdoc == "quadratic":
        cost = QuadraticLoadCost(base_loads=values)
    else:
        cost = TableCost(tuple(tuple(_to_fraction(c) for c in row) for row in cdoc))

    grid = GridModel(values=values, kernel=kernel, cost=cost, iid_uniform=iid)

    dkernel = tuple(tuple(_to_fraction(p) for p in row) for row in ddoc["kernel"])
    laws = []
    for law in adoc["per_state"]:
        if law["kind"] == "fixed_count":
            laws.append(FixedCountArrivals(int(law["count"])))
        elif law["kind"] == "tabulated":
            outcomes = tuple(
                (_to_fraction(o["prob"]),
                 tuple(VehicleState(int(s), int(g)) for s, g in o["vehicles"]))
                for o in law["outcomes"])
            laws.append(TabulatedArrivals(outcomes))
        else:
            raise ValueError(f"unknown arrival law kind {law['kind']!r}")
    demand = DemandModel(kernel=dkernel, arrivals=tuple(laws))

    init = doc.get("initial", {})
    return ScenarioModel(
        name=str(doc.get("name", "scenario")),
        num_chargers=n, max_stay=max_stay, max_units=max_units,
        grid=grid, demand=demand, penalty=penalty,
        initial_grid=init.get("grid"), initial_demand=init.get("demand"))


def load_scenario(path) -> ScenarioModel:
    with open(path) as fh:
        return scenario_from_json(json.load(fh))


def save_scenario(scenario: ScenarioModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_json(scenario), fh, indent=2)
        fh.write("\n")
