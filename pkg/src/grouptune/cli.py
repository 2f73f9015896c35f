"""Command-line entry point: ``grouptune {tune,compare,validate-groups,report,make-landscape}``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import statistics
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .baselines import SearcherKind, run_global_sa, run_rio
from .evaluation import (
    BenchmarkSpec,
    CompilerEvaluator,
    EvaluatorError,
    ReferenceResult,
    SyntheticEvaluator,
    SyntheticLandscape,
    manifest_digest,
    planted_landscape,
    synthetic_table,
)
from .history import HISTORY_FILE, HistoryError, JsonlHistory, read_history
from .options import (
    GCC_920_SIZES,
    GroupTableError,
    load_group_table,
    Combination,
    render_flags,
    shipped_table_path,
)
from .report import build_report, write_report
from .search import (
    DEFAULT_ALPHA,
    DEFAULT_BUDGET,
    DEFAULT_N_INIT,
    DEFAULT_T0,
    DEFAULT_T_MIN,
    AnnealingSchedule,
    BudgetExhausted,
    make_rng,
    run_search,
)

log = logging.getLogger("grouptune")

EXIT_OK = 0
EXIT_INVALID = 1  # validate-groups found a violated invariant
EXIT_CONFIG = 2
EXIT_EVALUATOR = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


@dataclass
class SessionConfig:
    algorithm: str = SearcherKind.GROUP_TUNER.value
    budget: int = DEFAULT_BUDGET
    n_init: int = DEFAULT_N_INIT
    t0: float = DEFAULT_T0
    tmin: float = DEFAULT_T_MIN
    alpha: float = DEFAULT_ALPHA
    seed: int = 0
    groups: str | None = None
    bench: str | None = None
    cc: str | None = None
    out: str = "session"
    reps: int = 5
    pin_core: int | None = None
    evaluator: str = "compiler"
    landscape: str | None = None

    def validate(self) -> None:
        if self.algorithm not in {k.value for k in SearcherKind}:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.budget <= self.n_init:
            raise ConfigError(f"budget ({self.budget}) must exceed n_init ({self.n_init})")
        if self.n_init < 1 or self.reps < 1:
            raise ConfigError("n_init and reps must be positive")
        if self.evaluator not in ("compiler", "synthetic"):
            raise ConfigError(f"unknown evaluator {self.evaluator!r}")
        if self.evaluator == "compiler" and not self.bench:
            raise ConfigError("the compiler evaluator needs --bench")
        if self.evaluator == "synthetic" and not self.landscape:
            raise ConfigError("the synthetic evaluator needs --landscape")
        for name in ("groups", "bench", "landscape"):
            p = getattr(self, name)
            if p and not Path(p).exists():
                raise ConfigError(f"--{name} path does not exist: {p}")
        try:
            self.schedule()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def schedule(self) -> AnnealingSchedule:
        return AnnealingSchedule.for_budget(self.budget, self.n_init, self.t0, self.tmin, self.alpha)

    def groups_path(self) -> Path:
        return Path(self.groups) if self.groups else shipped_table_path()

    def compiler(self) -> str:
        return self.cc or os.environ.get("GROUPTUNE_CC") or "gcc"

    def provenance(self) -> dict:
        # out is excluded so identical sessions in different directories match byte for byte
        d = dataclasses.asdict(self)
        d.pop("out")
        if self.evaluator == "compiler":
            d["cc"] = self.compiler()
        return d


def _make_evaluator(cfg: SessionConfig, table):
    if cfg.evaluator == "synthetic":
        ev = SyntheticEvaluator(SyntheticLandscape.load(cfg.landscape), table, seed=cfg.seed)
        return ev, ev.establish_reference()
    bench = BenchmarkSpec.from_manifest(cfg.bench)
    ev = CompilerEvaluator(bench, table, cc=cfg.compiler(), repetitions=cfg.reps, pin_core=cfg.pin_core)
    return ev, ev.establish_reference()


def run_session(cfg: SessionConfig, table, evaluator, ref: ReferenceResult, out_dir) -> dict:
    """Run one searcher, write history + report into ``out_dir``; returns a summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    schedule = cfg.schedule()
    header = {
        "grouping_digest": table.digest(),
        "compiler_id": table.compiler_id,
        "algorithm": cfg.algorithm,
        "schedule": schedule.to_dict(),
        "seed": cfg.seed,
        "benchmark_digest": manifest_digest(cfg.bench if cfg.evaluator == "compiler" else cfg.landscape),
        "reference": ref.to_dict(),
        "config": cfg.provenance(),
    }
    rng = make_rng(cfg.seed)
    clock = time.time if cfg.evaluator == "compiler" else None
    started = time.perf_counter()
    with JsonlHistory(out_dir / HISTORY_FILE, header, width=len(table)) as hist:
        if cfg.algorithm == SearcherKind.RIO.value:
            best_comb, best_perf = run_rio(table, evaluator, rng, cfg.budget, hist, clock)
        elif cfg.algorithm == SearcherKind.GLOBAL_SA.value:
            best_comb, best_perf = run_global_sa(table, schedule, cfg.n_init, evaluator, rng, hist,
                                                 cfg.budget, clock)
        else:
            best_comb, best_perf = run_search(table, schedule, cfg.n_init, evaluator, rng, hist,
                                              cfg.budget, clock=clock)
        records = hist.records
    wall = time.perf_counter() - started
    report = build_report(records, ref)
    write_report(out_dir, records, report)
    return {"best_comb": best_comb, "best_perf": best_perf, "report": report, "wall_time": wall}


def _fail(code: int, msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return code


def _guarded(fn):
    """Map failure categories onto exit codes."""
    try:
        return fn()
    except (ConfigError, GroupTableError) as exc:
        return _fail(EXIT_CONFIG, f"config: {exc}")
    except (EvaluatorError, BudgetExhausted) as exc:
        return _fail(EXIT_EVALUATOR, f"evaluator: {exc}")
    except (OSError, HistoryError) as exc:
        return _fail(EXIT_IO, f"io: {exc}")


def cmd_tune(cfg: SessionConfig) -> int:
    def body():
        cfg.validate()
        table = load_group_table(cfg.groups_path())
        evaluator, ref = _make_evaluator(cfg, table)
        try:
            res = run_session(cfg, table, evaluator, ref, cfg.out)
        finally:
            if hasattr(evaluator, "close"):
                evaluator.close()
        best: Combination = res["best_comb"]
        print(" ".join(render_flags(best, table)))
        print(f"best_perf {res['best_perf']!r}")
        print(f"perf_O3 {ref.perf_O3!r}")
        print(f"improvement_pct {res['report'].improvement_pct:.4f}")
        return EXIT_OK

    return _guarded(body)


def cmd_compare(base: SessionConfig, algorithms: list[str], seeds: list[int]) -> int:
    sessions = [(a, s) for a in algorithms for s in seeds]
    if len(sessions) < 2:
        return _fail(EXIT_CONFIG, "compare needs at least two (algorithm, seed) sessions")

    def body():
        for a in algorithms:
            dataclasses.replace(base, algorithm=a).validate()
        table = load_group_table(base.groups_path())
        out = Path(base.out)
        out.mkdir(parents=True, exist_ok=True)
        shared = _make_evaluator(base, table) if base.evaluator == "compiler" else None
        rows = []
        n_windows = -(-base.budget // 50)
        try:
            with open(out / "compare.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["algorithm", "seed", "best_improvement_pct", "wall_time_s"]
                           + [f"window_{i}" for i in range(n_windows)])
                for i, (alg, seed) in enumerate(sessions):
                    cfg = dataclasses.replace(base, algorithm=alg, seed=seed)
                    evaluator, ref = shared or _make_evaluator(cfg, table)
                    res = run_session(cfg, table, evaluator, ref, out / f"{i:03d}-{alg}-seed{seed}")
                    rep = res["report"]
                    windows = [win["mean_improvement_pct"] for win in rep.window_stats]
                    rows.append((alg, seed, rep.improvement_pct, res["wall_time"], windows))
                    w.writerow([alg, seed, rep.improvement_pct, f"{res['wall_time']:.3f}"]
                               + ["" if v is None else v for v in windows])
                    # partial results survive a failing later session
                    fh.flush()
        finally:
            if shared:
                shared[0].close()
        text = _compare_table(rows, algorithms)
        (out / "compare.txt").write_text(text)
        print(text, end="")
        return EXIT_OK

    return _guarded(body)


def _compare_table(rows, algorithms) -> str:
    lines = []
    header = f"{'algorithm':<12} {'sessions':>8} {'median best %':>14} {'mean best %':>12} {'wall s':>9}  window means %"
    lines.append(header)
    for alg in algorithms:
        mine = [r for r in rows if r[0] == alg]
        bests = [r[2] for r in mine if r[2] is not None]
        n_win = max(len(r[4]) for r in mine)
        win_means = []
        for i in range(n_win):
            vals = [r[4][i] for r in mine if i < len(r[4]) and r[4][i] is not None]
            win_means.append(f"{statistics.fmean(vals):.2f}" if vals else "-")
        med = f"{statistics.median(bests):.3f}" if bests else "-"
        mean = f"{statistics.fmean(bests):.3f}" if bests else "-"
        wall = sum(r[3] for r in mine)
        lines.append(f"{alg:<12} {len(mine):>8} {med:>14} {mean:>12} {wall:>9.2f}  {' '.join(win_means)}")
    return "\n".join(lines) + "\n"


def cmd_validate_groups(path) -> int:
    path = Path(path) if path else shipped_table_path()
    if not path.exists():
        return _fail(EXIT_IO, f"no such file: {path}")
    try:
        table = load_group_table(path)
    except GroupTableError as exc:
        return _fail(EXIT_INVALID, str(exc))
    sizes = table.sizes
    print(f"{table.compiler_id}: {len(table.groups)} groups, {len(table)} options")
    for g in table.groups:
        print(f"  {g.index:>3}  {len(g.members):>3}  {g.description}")
    if table.compiler_id == "gcc-9.2.0" and tuple(sizes) != GCC_920_SIZES:
        return _fail(EXIT_INVALID, f"gcc-9.2.0 group sizes {sizes} differ from {list(GCC_920_SIZES)}")
    return EXIT_OK


def cmd_report(session_dir) -> int:
    def body():
        header, records = read_history(Path(session_dir) / HISTORY_FILE)
        if not records:
            raise HistoryError("history has no records")
        ref = ReferenceResult(**header["reference"])
        report = build_report(records, ref)
        write_report(session_dir, records, report)
        print(f"{len(records)} records, best improvement {report.improvement_pct}")
        return EXIT_OK

    return _guarded(body)


def cmd_make_landscape(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.synthetic:
        n, size = (int(x) for x in args.synthetic.lower().split("x"))
        table = synthetic_table(n, size, args.seed)
        groups_out = out.with_name(out.stem + "-groups.json")
        groups_out.write_text(json.dumps(table.to_dict(), indent=1) + "\n")
        print(f"wrote {groups_out}")
    else:
        table = load_group_table(args.groups or shipped_table_path())
    land = planted_landscape(table, args.seed, n_synergies=args.synergies, n_redundant=args.redundant)
    out.write_text(json.dumps(land.to_dict(), indent=1, sort_keys=True) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


_SESSION_FLAGS = {
    # flag: (dest, type, help)
    "--algorithm": ("algorithm", str, "group-tuner | rio | global-sa"),
    "--budget": ("budget", int, "total evaluations (default 500)"),
    "--n-init": ("n_init", int, "candidate list size / initial samples (default 10)"),
    "--seed": ("seed", int, "RNG seed"),
    "--groups": ("groups", str, "grouping file (default: shipped gcc-9.2.0 table)"),
    "--bench": ("bench", str, "benchmark manifest (JSON)"),
    "--cc": ("cc", str, "compiler (default $GROUPTUNE_CC or gcc)"),
    "--out": ("out", str, "session directory"),
    "--reps": ("reps", int, "timed runs per evaluation (default 5)"),
    "--pin-core": ("pin_core", int, "pin benchmark runs to this CPU core"),
    "--t0": ("t0", float, "initial temperature"),
    "--tmin": ("tmin", float, "termination temperature"),
    "--alpha": ("alpha", float, "acceptance scaling factor"),
    "--evaluator": ("evaluator", str, "compiler | synthetic"),
    "--landscape": ("landscape", str, "synthetic landscape file (JSON)"),
}


def _add_session_flags(p, skip=()):
    p.add_argument("--config", help="JSON config file; CLI flags override it")
    for flag, (dest, typ, hlp) in _SESSION_FLAGS.items():
        if flag not in skip:
            p.add_argument(flag, dest=dest, type=typ, default=None, help=hlp)


def config_from_args(args) -> SessionConfig:
    """CLI flags > config file > built-in defaults."""
    values = {}
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text())
        fields = {f.name for f in dataclasses.fields(SessionConfig)}
        unknown = set(doc) - fields
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values.update(doc)
    for dest, *_ in _SESSION_FLAGS.values():
        v = getattr(args, dest, None)
        if v is not None:
            values[dest] = v
    return SessionConfig(**values)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="grouptune", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="run one tuning session")
    _add_session_flags(tune)

    cmp_ = sub.add_parser("compare", help="run several searchers/seeds on one benchmark")
    _add_session_flags(cmp_, skip=("--algorithm", "--seed"))
    cmp_.add_argument("--algorithms", nargs="+", default=[k.value for k in SearcherKind])
    cmp_.add_argument("--seeds", nargs="+", type=int, default=[0])

    val = sub.add_parser("validate-groups", help="check a grouping file")
    val.add_argument("path", nargs="?", default=None)

    rep = sub.add_parser("report", help="rebuild report.json/report.csv from a session's history")
    rep.add_argument("session_dir")

    mk = sub.add_parser("make-landscape", help="write a planted synthetic landscape")
    mk.add_argument("--out", required=True)
    mk.add_argument("--groups", default=None)
    mk.add_argument("--synthetic", default=None, metavar="GxS",
                    help="build an abstract G-group, S-flag-per-group space instead of --groups")
    mk.add_argument("--seed", type=int, default=0)
    mk.add_argument("--synergies", type=int, default=3)
    mk.add_argument("--redundant", type=int, default=20)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("tune", "compare"):
        try:
            cfg = config_from_args(args)
        except (ConfigError, OSError, json.JSONDecodeError, TypeError) as exc:
            return _fail(EXIT_CONFIG, f"config: {exc}")
        if args.command == "tune":
            return cmd_tune(cfg)
        return cmd_compare(cfg, args.algorithms, args.seeds)
    if args.command == "validate-groups":
        return cmd_validate_groups(args.path)
    if args.command == "report":
        return cmd_report(args.session_dir)
    return cmd_make_landscape(args)


if __name__ == "__main__":
    sys.exit(main())
