"""Trajectory simulation and policy comparison.

Two engines produce bit-identical results:

* a scalar reference engine (`run_trajectory`) that walks one trajectory with
  exact rational stage costs, used by the dominance certifier, the DP
  consistency check, and anywhere clarity beats speed;
* a vectorized engine that advances all Monte Carlo trajectories of a cell in
  lock step with counting-sort policy evaluation, used by `monte_carlo` /
  `figure_experiment` at benchmark scale.

Randomness is addressed by (seed, trajectory, stage, source), so runs couple
across policies and arrival rates, and results do not depend on execution
order or thread count.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import streams
from .core import ActionVector, SystemState, step_vehicles
from .models import (CapacityCost, FixedCountArrivals, QuadraticLoadCost,
                     ScenarioModel, TabulatedArrivals, TableCost, admit,
                     capacity_scenario, draw_initial, sample_grid,
                     sample_demand, with_arrival_rate)
from .policies import HeuristicPolicy, make_policy


# ---------------------------------------------------------------------------
# Scalar engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageBill:
    charging: Fraction
    penalty: Fraction
    aggregate: int
    rejected: int


def advance_stage(scenario: ScenarioModel, state: SystemState, action: ActionVector,
                  stage: int, key, traj: int) -> tuple[SystemState, StageBill]:
    """One stage-boundary step: pay the stage cost, process departures, then
    admit the next stage's arrivals and move the grid/demand chains."""
    action.check_feasible(state.vehicles)
    charging = Fraction(scenario.grid.cost(action.aggregate, state.grid))
    pen = Fraction(0)
    for v, a in zip(state.vehicles, action.bits):
        if v.stay == 1:
            pen += scenario.penalty(v.need - a)
    vehicles = step_vehicles(state.vehicles, action)
    d_next, arrivals = sample_demand(scenario.demand, state.demand, key, traj,
                                     stage, scenario.max_stay)
    vehicles, rejected = admit(vehicles, arrivals)
    s_next = sample_grid(scenario.grid, state.grid, action.aggregate, key, traj, stage)
    return (SystemState(vehicles, s_next, d_next),
            StageBill(charging, pen, action.aggregate, rejected))


@dataclass(frozen=True)
class TrajectoryResult:
    total_cost: Fraction
    stages: int
    time_average: float          # warm-up excluded
    time_average_raw: float      # total / stages
    warmup: int
    charging_total: Fraction
    penalty_total: Fraction
    rejected_arrivals: int
    stage_charging: tuple[Fraction, ...] | None
    stage_penalty: tuple[Fraction, ...] | None


def run_trajectory(scenario: ScenarioModel, policy, stages: int, seed: int,
                   traj: int = 0, warmup: int = 20,
                   record_stages: bool = True) -> TrajectoryResult:
    """Simulate one trajectory from the all-empty state.  Deterministic in
    (scenario, policy, stages, seed, traj)."""
    if stages < 1:
        raise ValueError("need at least one stage")
    warmup = min(warmup, stages - 1)
    key = streams.philox_key(seed)
    state = draw_initial(scenario, key, traj)
    charging = Fraction(0)
    penalty = Fraction(0)
    tail = Fraction(0)
    rejected = 0
    per_c: list[Fraction] = []
    per_p: list[Fraction] = []
    for t in range(stages):
        action = policy.decide(state, t)
        state, bill = advance_stage(scenario, state, action, t, key, traj)
        charging += bill.charging
        penalty += bill.penalty
        if t >= warmup:
            tail += bill.charging + bill.penalty
        rejected += bill.rejected
        if record_stages:
            per_c.append(bill.charging)
            per_p.append(bill.penalty)
    total = charging + penalty
    return TrajectoryResult(
        total_cost=total, stages=stages,
        time_average=float(tail) / (stages - warmup),
        time_average_raw=float(total) / stages,
        warmup=warmup, charging_total=charging, penalty_total=penalty,
        rejected_arrivals=rejected,
        stage_charging=tuple(per_c) if record_stages else None,
        stage_penalty=tuple(per_p) if record_stages else None)


# ---------------------------------------------------------------------------
# Vectorized engine
# ---------------------------------------------------------------------------

def _batch_supported(scenario: ScenarioModel, policy) -> bool:
    if not isinstance(policy, HeuristicPolicy):
        return False
    if getattr(policy.budget, "budget_kind", None) != "capacity":
        return False
    for law in scenario.demand.arrivals:
        if isinstance(law, FixedCountArrivals):
            if law.count > streams.MAX_ARRIVALS_PER_STAGE:
                return False
        elif not isinstance(law, TabulatedArrivals):
            return False
    return True


class _BatchState:
    """All trajectories of one Monte Carlo cell, advanced in lock step.

    Charger columns are allocated lazily: lowest-index admission keeps the
    occupied columns at the front, so the live width tracks the historical
    occupancy peak instead of the full charger count.
    """

    def __init__(self, scenario: ScenarioModel, policy: HeuristicPolicy,
                 n_traj: int, seed: int):
        self.sc = scenario
        self.policy = policy
        self.n = n_traj
        self.key = streams.philox_key(seed)
        self.B = scenario.max_stay
        self.E = scenario.max_units
        self.N = scenario.num_chargers
        self.width = min(self.N, 8)
        self.lam = np.zeros((n_traj, self.width), dtype=np.int16)
        self.gam = np.zeros((n_traj, self.width), dtype=np.int16)
        self.values = np.asarray(scenario.grid.values, dtype=np.int64)
        cost = scenario.grid.cost
        if isinstance(cost, TableCost):
            self.cost_table = np.array([[float(c) for c in row] for row in cost.table])
        q = [float(v) for v in scenario.penalty.values]
        self._q_int = all(v.denominator == 1 for v in scenario.penalty.values)
        self.q_arr = (np.array([int(v) for v in scenario.penalty.values], dtype=np.int64)
                      if self._q_int else np.array(q))
        # Priority bucket layout: theta shifted to 0.., combined with the
        # policy-specific major key.  One extra bucket holds non-chargeable.
        self.wt = self.B + self.E               # laxity range width
        if policy.name == "edf":
            self.nb = self.B * self.wt
        else:
            self.nb = self.wt * (self.E + 1)
        self.nbc = self.nb + 1
        self._init_exogenous()
        self.charging = np.zeros(n_traj)
        self.penalty = np.zeros(n_traj) if not self._q_int else np.zeros(n_traj, dtype=np.int64)
        self.charging_tail = np.zeros(n_traj)
        self.penalty_tail = np.zeros(n_traj) if not self._q_int else np.zeros(n_traj, dtype=np.int64)
        self.rejected = np.zeros(n_traj, dtype=np.int64)

    def _init_exogenous(self):
        sc, n = self.sc, self.n
        if sc.initial_grid is not None:
            self.s_idx = np.full(n, sc.initial_grid, dtype=np.int64)
        else:
            u = streams.uniforms_batch(self.key, n, 0, streams.INIT_GRID, 1)[:, 0]
            if sc.grid.iid_uniform:
                self.s_idx = (u * sc.grid.state_count).astype(np.int64)
            else:
                cdf = np.cumsum([float(p) for p in sc.grid.initial_distribution()])
                self.s_idx = np.minimum((cdf[None, :] <= u[:, None]).sum(1),
                                        sc.grid.state_count - 1)
        if sc.initial_demand is not None:
            self.d_idx = np.full(n, sc.initial_demand, dtype=np.int64)
        else:
            u = streams.uniforms_batch(self.key, n, 0, streams.INIT_DEMAND, 1)[:, 0]
            cdf = np.cumsum([float(p) for p in sc.demand.initial_distribution()])
            self.d_idx = np.minimum((cdf[None, :] <= u[:, None]).sum(1),
                                    sc.demand.state_count - 1)
        if not sc.grid.iid_uniform:
            ns = sc.grid.state_count
            self.grid_cdf = np.cumsum(
                np.array([[[float(p) for p in row] for row in pa] for pa in sc.grid.kernel]),
                axis=2)
        if sc.demand.state_count > 1:
            self.demand_cdf = np.cumsum(
                np.array([[float(p) for p in row] for row in sc.demand.kernel]), axis=1)
        self._prep_arrival_tables()

    def _prep_arrival_tables(self):
        self.arr_tables = []
        for law in self.sc.demand.arrivals:
            if isinstance(law, TabulatedArrivals):
                kmax = max((len(vs) for _, vs in law.outcomes), default=0)
                stays = np.zeros((len(law.outcomes), max(kmax, 1)), dtype=np.int16)
                reqs = np.zeros_like(stays)
                lens = np.zeros(len(law.outcomes), dtype=np.int64)
                for o, (_, vs) in enumerate(law.outcomes):
                    lens[o] = len(vs)
                    for k, v in enumerate(vs):
                        stays[o, k] = v.stay
                        reqs[o, k] = v.need
                cdf = np.cumsum([float(p) for p, _ in law.outcomes])
                self.arr_tables.append(("tab", stays, reqs, lens, cdf))
            else:
                self.arr_tables.append(("fixed", law.count))

    def _grow(self, extra: int):
        extra = min(extra, self.N - self.width)
        if extra <= 0:
            return
        pad = np.zeros((self.n, extra), dtype=np.int16)
        self.lam = np.concatenate([self.lam, pad], axis=1)
        self.gam = np.concatenate([self.gam, pad], axis=1)
        self.width += extra

    def _decide(self):
        """Ranked-heuristic decision for all trajectories at once.

        Unconstrained trajectories (budget covers every unfinished vehicle)
        just charge everything chargeable.  Only the trajectories where the
        capacity binds go through the counting sort: bucket each chargeable
        vehicle by its priority key, charge whole buckets in key order, and
        break the boundary bucket by charger index.
        """
        lam, gam = self.lam, self.gam
        chargeable = gam > 0
        v_count = chargeable.sum(1, dtype=np.int32)
        m = np.minimum(self.values[self.s_idx], v_count).astype(np.int32)
        binding = np.flatnonzero(m < v_count)
        if binding.size == 0:
            return chargeable, m
        action = chargeable.copy()
        sub_l = lam[binding]
        sub_g = gam[binding]
        sub_c = chargeable[binding]
        theta_s = (sub_l - sub_g).astype(np.int32) + (self.E - 1)
        if self.policy.name == "edf":
            code = (sub_l.astype(np.int32) - 1) * self.wt + theta_s
        elif self.policy.name == "llsp":
            code = theta_s * (self.E + 1) + sub_g
        else:
            code = theta_s * (self.E + 1) + (self.E - sub_g)
        code = np.where(sub_c, code, self.nb).astype(np.int32)
        nb_rows = binding.size
        rowbase = (np.arange(nb_rows, dtype=np.int32) * self.nbc)[:, None]
        counts = np.bincount((rowbase + code).ravel(), minlength=nb_rows * self.nbc)
        cum = counts.reshape(nb_rows, self.nbc).cumsum(1, dtype=np.int32)
        m_b = m[binding]
        b_star = (cum[:, :self.nb] < m_b[:, None]).sum(1, dtype=np.int32)
        before = np.where(b_star > 0,
                          np.take_along_axis(cum, np.maximum(b_star - 1, 0)[:, None],
                                             axis=1)[:, 0],
                          0)
        r = m_b - before
        b_col = b_star[:, None]
        full = sub_c & (code < b_col)
        tb = sub_c & (code == b_col)
        rank = tb.cumsum(1, dtype=np.int32)
        action[binding] = full | (tb & (rank <= r[:, None]))
        return action, m

    def _stage_charging_cost(self, aggregate: np.ndarray) -> np.ndarray:
        cost = self.sc.grid.cost
        if isinstance(cost, CapacityCost):
            return np.where(aggregate <= self.values[self.s_idx],
                            0.0, float(cost.ceiling))
        if isinstance(cost, QuadraticLoadCost):
            load = aggregate + self.values[self.s_idx]
            return (load * load).astype(np.float64)
        if isinstance(cost, TableCost):
            return self.cost_table[aggregate, self.s_idx]
        raise NotImplementedError(f"no vectorized form for {type(cost).__name__}")

    def step(self, t: int, accumulate_tail: bool):
        action, aggregate = self._decide()
        lam, gam = self.lam, self.gam
        # Stage cost (paid for stage t).
        c = self._stage_charging_cost(aggregate)
        short = np.where(lam == 1, gam - action, 0)
        p = self.q_arr[short].sum(1, dtype=self.penalty.dtype)
        self.charging += c
        self.penalty += p
        if accumulate_tail:
            self.charging_tail += c
            self.penalty_tail += p
        # Vehicle step.
        gam -= action
        lam -= lam > 0
        gam *= lam > 0
        # Arrivals for stage t+1.
        self._admit(t)
        # Demand chain.
        if self.sc.demand.state_count > 1:
            u = streams.uniforms_batch(self.key, self.n, t, streams.DEMAND, 1)[:, 0]
            rows = self.demand_cdf[self.d_idx]
            self.d_idx = np.minimum((rows <= u[:, None]).sum(1),
                                    self.sc.demand.state_count - 1)
        # Grid chain given the realized aggregate.
        u = streams.uniforms_batch(self.key, self.n, t, streams.GRID, 1)[:, 0]
        if self.sc.grid.iid_uniform:
            self.s_idx = (u * self.sc.grid.state_count).astype(np.int64)
        else:
            rows = self.grid_cdf[self.s_idx, aggregate]
            self.s_idx = np.minimum((rows <= u[:, None]).sum(1),
                                    self.sc.grid.state_count - 1)

    def _admit(self, t: int):
        # Arrival batches per trajectory; demand may mix law kinds per state,
        # but a single demand state (the common case) takes one in-place path.
        if self.sc.demand.state_count == 1:
            self._admit_for(t, None, self.arr_tables[0])
        else:
            for d, table in enumerate(self.arr_tables):
                rows = np.flatnonzero(self.d_idx == d)
                if rows.size:
                    self._admit_for(t, rows, table)

    def _admit_for(self, t: int, rows: np.ndarray | None, table):
        """Place this stage's arrivals for the given trajectories (all of
        them when rows is None, which writes in place without copies)."""
        n_rows = self.n if rows is None else rows.size
        if table[0] == "fixed":
            k = table[1]
            if k == 0:
                return
            u_stay = streams.uniforms_batch(self.key, self.n, t, streams.STAY, k)
            u_req = streams.uniforms_batch(self.key, self.n, t, streams.REQUEST, k)
            if rows is not None:
                u_stay, u_req = u_stay[rows], u_req[rows]
            stays = (u_stay * self.B).astype(np.int16) + 1
            reqs = (u_req * stays).astype(np.int16) + 1
            want = np.full(n_rows, k, dtype=np.int64)
        else:
            _, tstays, treqs, lens, cdf = table
            if lens.max(initial=0) == 0:
                return
            u = streams.uniforms_batch(self.key, self.n, t, streams.OUTCOME, 1)[:, 0]
            if rows is not None:
                u = u[rows]
            out_idx = np.minimum((cdf[None, :] <= u[:, None]).sum(1), len(cdf) - 1)
            stays = tstays[out_idx]
            reqs = treqs[out_idx]
            want = lens[out_idx]
        kmax = stays.shape[1]
        sub_lam = self.lam if rows is None else self.lam[rows]
        sub_gam = self.gam if rows is None else self.gam[rows]
        empty = sub_lam == 0
        in_slice = empty.sum(1, dtype=np.int64)
        total_empty = in_slice + (self.N - self.width)
        kk = np.minimum(want, total_empty)
        if rows is None:
            self.rejected += want - kk
        else:
            self.rejected[rows] += want - kk
        if (in_slice < kk).any():
            deficit = int((kk - in_slice).max())
            self._grow(max(deficit, 16))
            sub_lam = self.lam if rows is None else self.lam[rows]
            sub_gam = self.gam if rows is None else self.gam[rows]
            empty = sub_lam == 0
        cum_e = empty.cumsum(1, dtype=np.int32)
        placed = empty & (cum_e <= kk[:, None])
        slot = np.arange(kmax)[None, :] < kk[:, None]
        flat = np.flatnonzero(placed)
        sub_lam.ravel()[flat] = stays[slot]
        sub_gam.ravel()[flat] = reqs[slot]
        if rows is not None:
            self.lam[rows] = sub_lam
            self.gam[rows] = sub_gam


@dataclass(frozen=True)
class MonteCarloResult:
    mean: float
    stderr: float
    per_traj: np.ndarray          # warm-up-excluded per-trajectory averages
    mean_raw: float
    n_traj: int
    stages: int
    warmup: int
    seed: int
    rejected_mean: float


def _batch_monte_carlo(scenario, policy, stages, n_traj, seed, warmup) -> MonteCarloResult:
    warmup = min(warmup, stages - 1)
    bs = _BatchState(scenario, policy, n_traj, seed)
    for t in range(stages):
        bs.step(t, accumulate_tail=t >= warmup)
    total = bs.charging.astype(np.float64) + bs.penalty.astype(np.float64)
    tail = bs.charging_tail.astype(np.float64) + bs.penalty_tail.astype(np.float64)
    per = tail / (stages - warmup)
    mean = float(per.mean())
    stderr = float(per.std(ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0
    return MonteCarloResult(mean=mean, stderr=stderr, per_traj=per,
                            mean_raw=float((total / stages).mean()),
                            n_traj=n_traj, stages=stages, warmup=warmup, seed=seed,
                            rejected_mean=float(bs.rejected.mean()))


def monte_carlo(scenario: ScenarioModel, policy, stages: int, n_traj: int,
                base_seed: int, warmup: int = 20) -> MonteCarloResult:
    """Mean and standard error of warm-up-excluded time-averaged cost over
    n_traj independent trajectories; trajectory i draws from substreams
    addressed by (base_seed, i)."""
    if n_traj < 1:
        raise ValueError("need at least one trajectory")
    if stages < 1:
        raise ValueError("need at least one stage")
    if _batch_supported(scenario, policy):
        return _batch_monte_carlo(scenario, policy, stages, n_traj, base_seed, warmup)
    warmup_eff = min(warmup, stages - 1)
    per = np.empty(n_traj)
    raw = np.empty(n_traj)
    rej = np.empty(n_traj)
    for i in range(n_traj):
        tr = run_trajectory(scenario, policy, stages, base_seed, traj=i,
                            warmup=warmup, record_stages=False)
        per[i] = tr.time_average
        raw[i] = tr.time_average_raw
        rej[i] = tr.rejected_arrivals
    stderr = float(per.std(ddof=1) / np.sqrt(n_traj)) if n_traj > 1 else 0.0
    return MonteCarloResult(mean=float(per.mean()), stderr=stderr, per_traj=per,
                            mean_raw=float(raw.mean()), n_traj=n_traj,
                            stages=stages, warmup=warmup_eff, seed=base_seed,
                            rejected_mean=float(rej.mean()))


# ---------------------------------------------------------------------------
# Comparison experiments
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("policy", "penalty", "arrival_rate", "T", "n_traj",
               "mean_cost", "stderr", "seed")


@dataclass
class ComparisonTable:
    """Per (policy, arrival rate, penalty) cell statistics with shared seeds
    across policies, so gaps can be judged on paired trajectories."""
    penalty: str
    stages: int
    n_traj: int
    seed: int
    policies: tuple[str, ...]
    rates: tuple[int, ...]
    cells: dict = field(default_factory=dict)   # (policy, rate) -> MonteCarloResult

    def mean(self, policy: str, rate: int) -> float:
        return self.cells[(policy, rate)].mean

    def paired_gap(self, better: str, worse: str, rate: int) -> tuple[float, float]:
        """Mean and standard error of per-trajectory (worse - better) cost."""
        diffs = (self.cells[(worse, rate)].per_traj
                 - self.cells[(better, rate)].per_traj)
        se = float(diffs.std(ddof=1) / np.sqrt(len(diffs))) if len(diffs) > 1 else 0.0
        return float(diffs.mean()), se

    def paired_dominance_fraction(self, better: str, worse: str, rate: int) -> float:
        diffs = (self.cells[(worse, rate)].per_traj
                 - self.cells[(better, rate)].per_traj)
        return float((diffs >= 0).mean())

    def rows(self) -> list[dict]:
        out = []
        for policy in self.policies:
            for rate in self.rates:
                cell = self.cells[(policy, rate)]
                out.append({
                    "policy": policy, "penalty": self.penalty,
                    "arrival_rate": rate, "T": self.stages,
                    "n_traj": self.n_traj,
                    "mean_cost": f"{cell.mean:.12g}",
                    "stderr": f"{cell.stderr:.12g}",
                    "seed": self.seed,
                })
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(self.rows())


def figure_experiment(penalty: str, rates: Sequence[int], stages: int,
                      n_traj: int, seed: int,
                      policies: Sequence[str] = ("edf", "llsp", "lllp"),
                      base_scenario: ScenarioModel | None = None,
                      warmup: int = 20, threads: int | None = None) -> ComparisonTable:
    """Paired-seed comparison of the heuristics over an arrival-rate grid."""
    rates = tuple(int(r) for r in rates)
    if any(r < 0 for r in rates):
        raise ValueError("arrival rates must be non-negative")
    table = ComparisonTable(penalty=penalty, stages=stages, n_traj=n_traj,
                            seed=seed, policies=tuple(policies), rates=rates)

    def cell(policy_name: str, rate: int):
        if base_scenario is None:
            sc = capacity_scenario(rate, penalty)
        else:
            sc = with_arrival_rate(base_scenario, rate)
        pol = make_policy(policy_name, sc)
        return (policy_name, rate), monte_carlo(sc, pol, stages, n_traj, seed,
                                                warmup=warmup)

    jobs = [(p, r) for p in table.policies for r in rates]
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for key, res in ex.map(lambda pr: cell(*pr), jobs):
                table.cells[key] = res
    else:
        for p, r in jobs:
            key, res = cell(p, r)
            table.cells[key] = res
    return table
