"""Group-aware, history-guided simulated annealing over compiler flag combinations."""
from .options import (
    Combination,
    FlagSpec,
    GroupTable,
    GroupTableError,
    OptionGroup,
    default_combination,
    load_group_table,
    load_shipped_table,
    parse_flags,
    render_flags,
)
from .search import (
    AnnealingSchedule,
    BudgetExhausted,
    Candidate,
    CandidateList,
    acceptance_probability,
    group_aware_mutation,
    initialize,
    replace_worst,
    run_search,
)

__version__ = "0.1.0"
