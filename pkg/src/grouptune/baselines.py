"""Comparison searchers: random iterative optimization and global simulated annealing."""
from __future__ import annotations

from enum import Enum

from .evaluation import Evaluator
from .options import Combination, GroupTable
from .search import (
    AnnealingSchedule,
    BudgetExhausted,
    Mutation,
    Session,
    run_search,
)


class SearcherKind(str, Enum):
    GROUP_TUNER = "group-tuner"
    RIO = "rio"
    GLOBAL_SA = "global-sa"


def rio_step(table: GroupTable, rng) -> Combination:
    """Every flag drawn on/off independently with probability 1/2."""
    return Combination(table, tuple(rng.random() < 0.5 for _ in range(len(table))))


def global_sa_step(comb: Combination, rng) -> Combination:
    """Flip every flag of the space independently with probability 1/2."""
    return comb.flipped([p for p in range(len(comb.bits)) if rng.random() <= 0.5])


def global_mutation(comb: Combination, table: GroupTable, rng) -> Mutation:
    return Mutation(global_sa_step(comb, rng), None)


def run_global_sa(table: GroupTable, schedule: AnnealingSchedule, n_init: int, evaluator: Evaluator,
                  rng, history=None, budget: int | None = None, clock=None):
    return run_search(table, schedule, n_init, evaluator, rng, history, budget,
                      mutate=global_mutation, algorithm=SearcherKind.GLOBAL_SA.value, clock=clock)


def run_rio(table: GroupTable, evaluator: Evaluator, rng, budget: int, history=None, clock=None):
    """Pure random sampling for ``budget`` evaluations, keeping only the running best."""
    session = Session(table, evaluator, history, SearcherKind.RIO.value, budget, clock)
    best: tuple[Combination, float] | None = None
    while session.remaining > 0:
        comb = rio_step(table, rng)
        m = session.measure(comb)
        improved = m.valid and (best is None or m.perf < best[1])
        if improved:
            best = (comb, m.perf)
        session.record("anneal", None, comb, m, improved, None)
    if best is None:
        raise BudgetExhausted(f"no valid combination found in {budget} evaluations")
    return best
