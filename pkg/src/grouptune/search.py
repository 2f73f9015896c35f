"""History-guided simulated annealing with group-level mutation.

Draw order is part of the reproducibility contract. Per annealing step:
candidate pick, group pick, one flip draw per member of the chosen group,
then one acceptance draw only when the new combination is not better than
the worst entry. Uniform picks over a single item consume no draw.
"""
from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .evaluation import Evaluator, Measurement
from .history import HistoryRecord
from .options import Combination, GroupTable, default_combination

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 500
DEFAULT_N_INIT = 10
DEFAULT_T0 = 1.0
DEFAULT_T_MIN = 0.001
DEFAULT_ALPHA = 1.0


class BudgetExhausted(RuntimeError):
    pass


def pick(rng, n: int) -> int:
    """Uniform index in ``range(n)``; ``n == 1`` consumes nothing from ``rng``."""
    if n < 1:
        raise ValueError("cannot pick from an empty collection")
    return 0 if n == 1 else rng.randrange(n)


def make_rng(seed: int) -> random.Random:
    return random.Random(seed)


@dataclass(frozen=True)
class AnnealingSchedule:
    T0: float = DEFAULT_T0
    T_min: float = DEFAULT_T_MIN
    cool_r: float = 0.5
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if not 0 < self.T_min < self.T0:
            raise ValueError(f"need 0 < T_min < T0, got T_min={self.T_min} T0={self.T0}")
        if not 0 < self.cool_r < 1:
            raise ValueError(f"cool_r must be in (0, 1), got {self.cool_r}")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    @classmethod
    def for_budget(cls, budget: int = DEFAULT_BUDGET, n_init: int = DEFAULT_N_INIT,
                   T0: float = DEFAULT_T0, T_min: float = DEFAULT_T_MIN,
                   alpha: float = DEFAULT_ALPHA) -> "AnnealingSchedule":
        """Cooling rate chosen so the loop runs ``budget - n_init`` steps."""
        steps = budget - n_init
        if steps < 1:
            raise ValueError(f"budget ({budget}) must exceed n_init ({n_init})")
        return cls(T0, T_min, (T_min / T0) ** (1.0 / steps), alpha)

    def temperatures(self):
        """Temperatures at which the loop body runs: T0, T0*r, ... while T > T_min."""
        T = self.T0
        while T > self.T_min:
            yield T
            T *= self.cool_r

    @property
    def iterations(self) -> int:
        return sum(1 for _ in self.temperatures())

    def to_dict(self) -> dict:
        return {"T0": self.T0, "T_min": self.T_min, "cool_r": self.cool_r, "alpha": self.alpha}


@dataclass(frozen=True)
class Candidate:
    combination: Combination
    perf: float

    def __post_init__(self):
        if not (math.isfinite(self.perf) and self.perf > 0):
            raise ValueError(f"candidate perf must be finite and positive, got {self.perf}")


@dataclass
class CandidateList:
    """Fixed-capacity pool; entries are kept in insertion order so ties resolve oldest-first."""

    capacity: int
    entries: list[Candidate] = field(default_factory=list)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be positive")

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def full(self) -> bool:
        return len(self.entries) >= self.capacity

    def add(self, cand: Candidate) -> None:
        if self.full:
            raise ValueError("candidate list is full")
        self.entries.append(cand)

    def worst_index(self) -> int:
        # max() keeps the first maximal element, i.e. the oldest on ties
        return max(range(len(self.entries)), key=lambda i: self.entries[i].perf)

    def best_index(self) -> int:
        return min(range(len(self.entries)), key=lambda i: self.entries[i].perf)

    def worst(self) -> Candidate:
        return self.entries[self.worst_index()]

    def best(self) -> Candidate:
        return self.entries[self.best_index()]

    def replace_worst(self, cand: Candidate) -> Candidate:
        """Drop the worst entry, append ``cand``; returns the dropped entry."""
        if not self.full:
            raise ValueError("replace_worst needs a full list")
        dropped = self.entries.pop(self.worst_index())
        self.entries.append(cand)
        return dropped


def replace_worst(lst: CandidateList, cand: Candidate) -> CandidateList:
    lst.replace_worst(cand)
    return lst


class Mutation(NamedTuple):
    combination: Combination
    group: int | None  # group index (1-based, as in the table); None for global moves


MutationOp = Callable[[Combination, GroupTable, object], Mutation]


def group_aware_mutation(comb: Combination, table: GroupTable, rng) -> Mutation:
    """Pick one group uniformly and flip each of its members with probability 1/2."""
    gi = pick(rng, len(table.groups))
    flips = [p for p in table.group_positions(gi) if rng.random() <= 0.5]
    return Mutation(comb.flipped(flips), table.groups[gi].index)


def acceptance_probability(perf_new: float, perf_worst: float, T: float, alpha: float) -> float:
    """exp(-delta / (T * alpha)) with delta the relative regression against the worst entry."""
    if not perf_worst > 0:
        raise ValueError(f"perf_worst must be positive, got {perf_worst}")
    if not T > 0:
        raise ValueError(f"temperature must be positive, got {T}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    delta = (perf_new - perf_worst) / perf_worst
    if delta < 0:
        raise ValueError("perf_new beats perf_worst; that case replaces directly")
    return math.exp(-delta / (T * alpha))


class Session:
    """Budget and history bookkeeping shared by the initialization and search phases."""

    def __init__(self, table: GroupTable, evaluator: Evaluator, history=None,
                 algorithm: str = "group-tuner", budget: int | None = None, clock=None):
        self.table = table
        self.evaluator = evaluator
        self.history = history
        self.algorithm = algorithm
        self.budget = budget
        self.clock = clock
        self.used = 0

    @property
    def remaining(self) -> float:
        return math.inf if self.budget is None else self.budget - self.used

    def measure(self, comb: Combination) -> Measurement:
        if self.remaining <= 0:
            raise BudgetExhausted(f"evaluation budget of {self.budget} exhausted")
        m = self.evaluator.evaluate(comb)
        self.used += 1
        return m

    def record(self, phase: str, mutation_group: int | None, comb: Combination, m: Measurement,
               accepted: bool, temperature: float | None) -> None:
        if self.history is None:
            return
        self.history.append(HistoryRecord(
            iteration=self.used - 1,
            phase=phase,
            algorithm=self.algorithm,
            mutated_group=mutation_group,
            bits=comb.bitstring(),
            measurement=m,
            accepted=accepted,
            temperature=temperature,
            timestamp=self.clock() if self.clock else None,
        ))


def initialize(table: GroupTable, n_init: int, evaluator: Evaluator, rng, history=None,
               budget: int | None = None, mutate: MutationOp = group_aware_mutation,
               session: Session | None = None) -> CandidateList:
    """Fill a list of ``n_init`` valid candidates, each one mutation away from the -O3 seed.

    Invalid evaluations are recorded and retried with a fresh mutation; each
    attempt spends one unit of the session budget.
    """
    session = session or Session(table, evaluator, history, budget=budget)
    seed = default_combination(table)
    lst = CandidateList(n_init)
    while not lst.full:
        if session.remaining <= 0:
            raise BudgetExhausted(
                f"only {len(lst)} of {n_init} valid initial candidates within budget {session.budget}"
            )
        mut = mutate(seed, table, rng)
        m = session.measure(mut.combination)
        if m.valid:
            lst.add(Candidate(mut.combination, m.perf))
        else:
            log.info("initial candidate invalid (%s); retrying", m.status.value)
        session.record("init", mut.group, mut.combination, m, m.valid, None)
    return lst


def anneal(lst: CandidateList, schedule: AnnealingSchedule, rng, session: Session,
           mutate: MutationOp = group_aware_mutation) -> CandidateList:
    """The temperature loop; stops when T <= T_min or the budget runs out."""
    table = session.table
    for T in schedule.temperatures():
        if session.remaining <= 0:
            break
        base = lst.entries[pick(rng, len(lst))].combination
        mut = mutate(base, table, rng)
        m = session.measure(mut.combination)
        accepted = False
        if m.valid:
            worst = lst.worst().perf
            if m.perf < worst:
                accepted = True
            else:
                p = acceptance_probability(m.perf, worst, T, schedule.alpha)
                accepted = rng.random() < p
            if accepted:
                lst.replace_worst(Candidate(mut.combination, m.perf))
        session.record("anneal", mut.group, mut.combination, m, accepted, T)
    return lst


def run_search(table: GroupTable, schedule: AnnealingSchedule, n_init: int, evaluator: Evaluator,
               rng, history=None, budget: int | None = None,
               mutate: MutationOp = group_aware_mutation, algorithm: str = "group-tuner",
               clock=None) -> tuple[Combination, float]:
    session = Session(table, evaluator, history, algorithm, budget, clock)
    lst = initialize(table, n_init, evaluator, rng, mutate=mutate, session=session)
    anneal(lst, schedule, rng, session, mutate)
    best = lst.best()
    return best.combination, best.perf
