"""Turning combinations into measurements.

Two evaluators share one contract, ``evaluate(comb) -> Measurement``:
:class:`CompilerEvaluator` builds and times a real program against its -O3
reference output, :class:`SyntheticEvaluator` scores a combination on a
:class:`SyntheticLandscape`.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import shutil
import subprocess
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol, Sequence

from .options import (
    BASE_LEVEL,
    Combination,
    FlagSpec,
    GroupTable,
    OptionGroup,
    default_combination,
    render_flags,
)

log = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 5
TIMEOUT_FACTOR = 10.0
MIN_TIMEOUT = 1.0
REFERENCE_TIMEOUT = 300.0
COMPILE_TIMEOUT = 600.0


class Status(str, Enum):
    VALID = "valid"
    COMPILE_ERROR = "compile-error"
    RUNTIME_ERROR = "runtime-error"
    TIMEOUT = "timeout"
    OUTPUT_MISMATCH = "output-mismatch"


class EvaluatorError(RuntimeError):
    """Hard failure: the session cannot continue (as opposed to an invalid status)."""


class CompilerNotFound(EvaluatorError):
    pass


class ReferenceFailed(EvaluatorError):
    pass


@dataclass(frozen=True)
class Measurement:
    status: Status
    perf: float | None = None
    runs: tuple[float, ...] = ()
    output_digest: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "status", Status(self.status))
        object.__setattr__(self, "runs", tuple(self.runs))
        if self.valid:
            if self.perf is None or not (self.perf > 0) or self.perf == float("inf"):
                raise ValueError(f"valid measurement needs finite positive perf, got {self.perf}")
        elif self.perf is not None:
            raise ValueError("invalid measurement must not carry perf")

    @property
    def valid(self) -> bool:
        return self.status is Status.VALID

    @classmethod
    def from_runs(cls, runs: Sequence[float], output_digest: str | None = None) -> "Measurement":
        runs = tuple(runs)
        return cls(Status.VALID, sum(runs) / len(runs), runs, output_digest)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "perf": self.perf,
            "runs": list(self.runs),
            "output_digest": self.output_digest,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Measurement":
        return cls(Status(d["status"]), d.get("perf"), tuple(d.get("runs", ())), d.get("output_digest"))


@dataclass(frozen=True)
class ReferenceResult:
    output_digest: str
    perf_O3: float

    def to_dict(self) -> dict:
        return {"output_digest": self.output_digest, "perf_O3": self.perf_O3}


class Evaluator(Protocol):
    def evaluate(self, comb: Combination) -> Measurement: ...


# ---------------------------------------------------------------- compiler


@dataclass(frozen=True)
class BenchmarkSpec:
    sources: tuple[str, ...]
    run_command: tuple[str, ...] = ("{bin}",)
    compile_extra: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    workdir: str | None = None
    timeout: float | None = None

    def __post_init__(self):
        if not self.sources:
            raise ValueError("benchmark needs at least one source file")
        if self.timeout is not None and not self.timeout > 0:
            raise ValueError("timeout must be positive")

    @classmethod
    def from_manifest(cls, path) -> "BenchmarkSpec":
        """Load a JSON manifest; relative paths resolve against the manifest's directory."""
        path = Path(path)
        doc = json.loads(path.read_text())
        base = path.resolve().parent

        def resolve(p):
            return str(p if Path(p).is_absolute() else base / p)

        workdir = doc.get("workdir")
        return cls(
            sources=tuple(resolve(s) for s in doc["sources"]),
            run_command=tuple(doc.get("run_command", ["{bin}"])),
            compile_extra=tuple(doc.get("compile_extra", ())),
            outputs=tuple(doc.get("outputs", ())),
            workdir=resolve(workdir) if workdir else None,
            timeout=doc.get("timeout"),
        )


def manifest_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _digest(chunks: Sequence[bytes]) -> str:
    h = hashlib.sha256()
    for c in chunks:
        h.update(len(c).to_bytes(8, "little"))
        h.update(c)
    return h.hexdigest()


def _resolve_compiler(cc: str) -> str:
    found = shutil.which(cc)
    if found is None:
        raise CompilerNotFound(f"compiler {cc!r} not found")
    return found


def _pin(core: int | None):
    if core is None:
        return None
    if not hasattr(os, "sched_setaffinity"):
        warnings.warn("CPU pinning is not supported on this host; running unpinned")
        return None

    def preexec():
        os.sched_setaffinity(0, {core})

    return preexec


class CompilerEvaluator:
    """Compile with the rendered flags, run ``repetitions`` times, compare output to -O3.

    Evaluations are strictly sequential; do not share one instance between threads.
    """

    def __init__(self, bench: BenchmarkSpec, table: GroupTable, cc: str = "gcc",
                 repetitions: int = DEFAULT_REPETITIONS, pin_core: int | None = None,
                 build_dir: str | None = None):
        if repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        self.bench = bench
        self.table = table
        self.cc = _resolve_compiler(cc)
        self.repetitions = repetitions
        self.preexec = _pin(pin_core)
        self._tmp = None
        if build_dir is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="grouptune-")
            build_dir = self._tmp.name
        self.build_dir = Path(build_dir)
        self.build_dir.mkdir(parents=True, exist_ok=True)
        self.reference: ReferenceResult | None = None

    def close(self):
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None

    def _compile(self, tokens: list[str]) -> Path | None:
        binary = self.build_dir / "bench.bin"
        binary.unlink(missing_ok=True)
        cmd = [self.cc, *tokens, *self.bench.compile_extra, *self.bench.sources, "-o", str(binary)]
        try:
            proc = subprocess.run(cmd, capture_output=True, timeout=COMPILE_TIMEOUT)
        except FileNotFoundError:
            raise CompilerNotFound(f"compiler {self.cc!r} not found") from None
        except subprocess.TimeoutExpired:
            log.warning("compile timed out")
            return None
        if proc.returncode != 0 or not binary.exists():
            log.debug("compile failed: %s", proc.stderr.decode(errors="replace")[-500:])
            return None
        return binary

    def _run_once(self, binary: Path, timeout: float) -> tuple[Status, float, str | None]:
        workdir = Path(self.bench.workdir) if self.bench.workdir else self.build_dir
        for out in self.bench.outputs:
            (workdir / out).unlink(missing_ok=True)
        cmd = [a.replace("{bin}", str(binary)) for a in self.bench.run_command]
        start = time.perf_counter()
        try:
            proc = subprocess.run(cmd, cwd=workdir, stdout=subprocess.PIPE, stderr=subprocess.DEVNULL,
                                  timeout=timeout, preexec_fn=self.preexec)
        except subprocess.TimeoutExpired:
            return Status.TIMEOUT, timeout, None
        elapsed = time.perf_counter() - start
        if proc.returncode != 0:
            return Status.RUNTIME_ERROR, elapsed, None
        chunks = [proc.stdout]
        for out in self.bench.outputs:
            p = workdir / out
            if not p.exists():
                return Status.RUNTIME_ERROR, elapsed, None
            chunks.append(p.read_bytes())
        return Status.VALID, elapsed, _digest(chunks)

    def _measure(self, tokens: list[str], timeout: float, expected: str | None) -> Measurement:
        binary = self._compile(tokens)
        if binary is None:
            return Measurement(Status.COMPILE_ERROR)
        runs, digest = [], None
        for _ in range(self.repetitions):
            status, elapsed, digest = self._run_once(binary, timeout)
            if status is not Status.VALID:
                return Measurement(status, runs=tuple(runs))
            if expected is not None and digest != expected:
                return Measurement(Status.OUTPUT_MISMATCH, runs=tuple(runs), output_digest=digest)
            if expected is None:
                expected = digest
            runs.append(elapsed)
        return Measurement.from_runs(runs, digest)

    def establish_reference(self) -> ReferenceResult:
        timeout = self.bench.timeout or REFERENCE_TIMEOUT
        m = self._measure([BASE_LEVEL], timeout, None)
        if not m.valid:
            raise ReferenceFailed(f"-O3 reference build/run failed: {m.status.value}")
        self.reference = ReferenceResult(m.output_digest, m.perf)
        return self.reference

    @property
    def timeout(self) -> float:
        if self.bench.timeout:
            return self.bench.timeout
        return max(TIMEOUT_FACTOR * self.reference.perf_O3, MIN_TIMEOUT)

    def evaluate(self, comb: Combination) -> Measurement:
        if self.reference is None:
            raise EvaluatorError("establish_reference() must run before evaluate()")
        return self._measure(render_flags(comb, self.table), self.timeout, self.reference.output_digest)


def establish_reference(bench: BenchmarkSpec, table: GroupTable, **kw) -> tuple[CompilerEvaluator, ReferenceResult]:
    ev = CompilerEvaluator(bench, table, **kw)
    return ev, ev.establish_reference()


# ---------------------------------------------------------------- synthetic


@dataclass(frozen=True)
class Synergy:
    group: int
    pattern: dict  # flag name -> required state
    bonus: float


@dataclass(frozen=True)
class SyntheticLandscape:
    """perf = base - sum(weights of enabled flags) - sum(bonuses of matched synergies) + noise."""

    base: float
    weights: dict = field(default_factory=dict)
    synergies: tuple[Synergy, ...] = ()
    noise_amplitude: float = 0.0
    floor: float = 1e-6

    def flags(self) -> set[str]:
        names = set(self.weights)
        for s in self.synergies:
            names |= set(s.pattern)
        return names

    def to_dict(self) -> dict:
        return {
            "base": self.base,
            "weights": dict(self.weights),
            "synergies": [{"group": s.group, "pattern": dict(s.pattern), "bonus": s.bonus}
                          for s in self.synergies],
            "noise_amplitude": self.noise_amplitude,
            "floor": self.floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticLandscape":
        return cls(
            base=float(d["base"]),
            weights={k: float(v) for k, v in d.get("weights", {}).items()},
            synergies=tuple(Synergy(int(s["group"]), dict(s["pattern"]), float(s["bonus"]))
                            for s in d.get("synergies", ())),
            noise_amplitude=float(d.get("noise_amplitude", 0.0)),
            floor=float(d.get("floor", 1e-6)),
        )

    @classmethod
    def load(cls, path) -> "SyntheticLandscape":
        return cls.from_dict(json.loads(Path(path).read_text()))


def synthetic_evaluate(comb: Combination, land: SyntheticLandscape, rng=None) -> Measurement:
    unknown = land.flags() - set(comb.table.names)
    if unknown:
        raise ValueError(f"landscape flags not in the space: {sorted(unknown)[:5]}")
    perf = land.base
    for name, w in land.weights.items():
        if comb[name]:
            perf -= w
    for s in land.synergies:
        if all(comb[n] == want for n, want in s.pattern.items()):
            perf -= s.bonus
    if land.noise_amplitude:
        perf += rng.uniform(-land.noise_amplitude, land.noise_amplitude)
    return Measurement.from_runs([max(perf, land.floor)])


class SyntheticEvaluator:
    def __init__(self, land: SyntheticLandscape, table: GroupTable, seed: int = 0):
        self.land = land
        self.table = table
        self.rng = random.Random(seed)
        unknown = land.flags() - set(table.names)
        if unknown:
            raise ValueError(f"landscape flags not in the space: {sorted(unknown)[:5]}")

    def establish_reference(self) -> ReferenceResult:
        m = synthetic_evaluate(default_combination(self.table), self.land, random.Random(0))
        return ReferenceResult("synthetic", m.perf)

    def evaluate(self, comb: Combination) -> Measurement:
        return synthetic_evaluate(comb, self.land, self.rng)


def planted_landscape(table: GroupTable, seed: int, n_synergies: int = 3, n_redundant: int = 20,
                      synergy_size: int = 4, base: float | None = None) -> SyntheticLandscape:
    """Random additive landscape with intra-group synergies and zero-weight flags.

    Each synergy requires a pattern over ``synergy_size`` members of one group
    (distinct groups), chosen to disagree with the -O3 state on at least half
    of those members so the seed does not start on top of it.
    """
    rng = random.Random(seed)
    names = list(table.names)
    redundant = set(rng.sample(names, n_redundant))
    weights = {}
    for n in names:
        if n in redundant:
            weights[n] = 0.0
        else:
            # magnitude in [0.2, 1.0), sign random
            weights[n] = rng.choice((-1, 1)) * rng.uniform(0.2, 1.0)
    o3 = default_combination(table)
    synergies = []
    for gi in rng.sample(range(len(table.groups)), n_synergies):
        g = table.groups[gi]
        members = rng.sample(list(g.names), min(synergy_size, len(g.members)))
        flip = set(rng.sample(members, (len(members) + 1) // 2))
        pattern = {n: (not o3[n]) if n in flip else o3[n] for n in members}
        synergies.append(Synergy(g.index, pattern, rng.uniform(4.0, 8.0)))
    if base is None:
        # keeps every combination comfortably above the floor
        reach = sum(w for w in weights.values() if w > 0) + sum(s.bonus for s in synergies)
        base = 1.0 + 1.25 * reach
    return SyntheticLandscape(base=base, weights=weights, synergies=tuple(synergies))


def synthetic_table(n_groups: int, group_size: int, seed: int = 0) -> GroupTable:
    """An abstract space ``g<i>f<j>`` with random -O3 defaults, for landscape experiments."""
    rng = random.Random(seed)
    groups = tuple(
        OptionGroup(i, f"synthetic group {i}",
                    tuple(FlagSpec(f"g{i}f{j}", rng.random() < 0.5) for j in range(1, group_size + 1)))
        for i in range(1, n_groups + 1)
    )
    return GroupTable(f"synthetic-{n_groups}x{group_size}", groups)
