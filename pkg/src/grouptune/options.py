"""Tunable flag space: grouping tables, combinations and command-line rendering."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

BASE_LEVEL = "-O3"
SHIPPED_TABLE = "gcc-9.2.0.json"
# Published per-group sizes for the shipped gcc-9.2.0 table.
GCC_920_SIZES = (28, 18, 9, 4, 6, 4, 12, 23, 12, 17, 10, 18, 8, 22, 15)


class GroupTableError(ValueError):
    """Raised when a grouping document is malformed or not a partition."""


@dataclass(frozen=True)
class FlagSpec:
    """A boolean ``-f`` toggle, rendered ``-f<name>`` when on and ``-fno-<name>`` when off."""

    name: str
    o3_default: bool = False

    def __post_init__(self):
        if not self.name or any(c.isspace() for c in self.name):
            raise GroupTableError(f"invalid flag name {self.name!r}")

    def token(self, on: bool) -> str:
        return f"-f{self.name}" if on else f"-fno-{self.name}"


@dataclass(frozen=True)
class OptionGroup:
    index: int
    description: str
    members: tuple[FlagSpec, ...]

    def __post_init__(self):
        if not self.members:
            raise GroupTableError(f"group {self.index} is empty")
        seen = set()
        for m in self.members:
            if m.name in seen:
                raise GroupTableError(f"group {self.index}: duplicate flag {m.name!r}")
            seen.add(m.name)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.members)


@dataclass(frozen=True)
class GroupTable:
    """A partition of the flag space into groups.

    The option space is the concatenation of group members in group order,
    which is also the bit order used by :class:`Combination`.
    """

    compiler_id: str
    groups: tuple[OptionGroup, ...]
    flags: tuple[FlagSpec, ...] = field(init=False, repr=False, compare=False)
    _position: dict = field(init=False, repr=False, compare=False)
    _slices: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.groups:
            raise GroupTableError("grouping table has no groups")
        owner: dict[str, int] = {}
        flags: list[FlagSpec] = []
        slices = []
        for g in self.groups:
            start = len(flags)
            for m in g.members:
                if m.name in owner:
                    raise GroupTableError(
                        f"flag {m.name!r} appears in groups {owner[m.name]} and {g.index}"
                    )
                owner[m.name] = g.index
                flags.append(m)
            slices.append(range(start, len(flags)))
        indices = [g.index for g in self.groups]
        if len(set(indices)) != len(indices):
            raise GroupTableError(f"duplicate group index in {indices}")
        object.__setattr__(self, "flags", tuple(flags))
        object.__setattr__(self, "_position", {f.name: i for i, f in enumerate(flags)})
        object.__setattr__(self, "_slices", tuple(slices))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.flags)

    @property
    def sizes(self) -> list[int]:
        return [len(g.members) for g in self.groups]

    def __len__(self) -> int:
        return len(self.flags)

    def position(self, name: str) -> int:
        return self._position[name]

    def group_positions(self, i: int) -> range:
        """Bit positions of the members of ``self.groups[i]`` (list position, not group index)."""
        return self._slices[i]

    def to_dict(self) -> dict:
        return {
            "compiler_id": self.compiler_id,
            "groups": [
                {
                    "index": g.index,
                    "description": g.description,
                    "members": [{"name": m.name, "o3_default": m.o3_default} for m in g.members],
                }
                for g in self.groups
            ],
        }

    def digest(self) -> str:
        """sha256 over the canonical JSON form; identifies the table in history headers."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class Combination:
    """On/off state for every flag of a table, stored in table bit order."""

    table: GroupTable = field(repr=False)
    bits: tuple[bool, ...]

    def __post_init__(self):
        if len(self.bits) != len(self.table):
            raise ValueError(f"combination has {len(self.bits)} states, space has {len(self.table)}")

    @classmethod
    def from_mapping(cls, table: GroupTable, states: Mapping[str, bool]) -> "Combination":
        missing = set(table.names) - set(states)
        extra = set(states) - set(table.names)
        if missing or extra:
            raise ValueError(f"state keys do not match the space: missing={sorted(missing)} extra={sorted(extra)}")
        return cls(table, tuple(bool(states[n]) for n in table.names))

    @classmethod
    def from_bitstring(cls, table: GroupTable, s: str) -> "Combination":
        if set(s) - {"0", "1"}:
            raise ValueError(f"not a bitstring: {s!r}")
        return cls(table, tuple(c == "1" for c in s))

    def __getitem__(self, name: str) -> bool:
        return self.bits[self.table.position(name)]

    def states(self) -> dict[str, bool]:
        return dict(zip(self.table.names, self.bits))

    def enabled(self) -> set[str]:
        return {n for n, b in zip(self.table.names, self.bits) if b}

    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def flipped(self, positions: Iterable[int]) -> "Combination":
        bits = list(self.bits)
        for p in positions:
            bits[p] = not bits[p]
        return Combination(self.table, tuple(bits))

    def hamming(self, other: "Combination") -> int:
        return sum(a != b for a, b in zip(self.bits, other.bits))


def _parse(doc) -> GroupTable:
    if not isinstance(doc, dict):
        raise GroupTableError("grouping document must be a JSON object")
    if "groups" not in doc or not isinstance(doc["groups"], list):
        raise GroupTableError("grouping document lacks a 'groups' array")
    groups = []
    for n, g in enumerate(doc["groups"]):
        try:
            index = int(g["index"])
            members = g["members"]
        except (KeyError, TypeError, ValueError) as exc:
            raise GroupTableError(f"group entry #{n}: missing or bad field ({exc})") from None
        if not isinstance(members, list):
            raise GroupTableError(f"group {index}: 'members' must be an array")
        specs = []
        for m in members:
            if not isinstance(m, dict) or "name" not in m or "o3_default" not in m:
                raise GroupTableError(f"group {index}: member {m!r} needs 'name' and 'o3_default'")
            if not isinstance(m["o3_default"], bool):
                raise GroupTableError(f"group {index}: flag {m['name']!r} o3_default must be true/false")
            specs.append(FlagSpec(str(m["name"]), m["o3_default"]))
        groups.append(OptionGroup(index, str(g.get("description", "")), tuple(specs)))
    return GroupTable(str(doc.get("compiler_id", "unknown")), tuple(groups))


def load_group_table(source) -> GroupTable:
    """Load a grouping document.

    ``source`` may be a path, an open text file, or an already-decoded dict.
    Errors name the offending group or flag.
    """
    if isinstance(source, dict):
        return _parse(source)
    try:
        if hasattr(source, "read"):
            doc = json.load(source)
        else:
            doc = json.loads(Path(source).read_text())
    except json.JSONDecodeError as exc:
        raise GroupTableError(f"cannot parse grouping document: {exc}") from None
    return _parse(doc)


def shipped_table_path() -> Path:
    return Path(str(resources.files("grouptune") / "data" / SHIPPED_TABLE))


def load_shipped_table() -> GroupTable:
    return load_group_table(shipped_table_path())


def default_combination(table: GroupTable) -> Combination:
    """The -O3 seed: every flag at its recorded -O3 state."""
    return Combination(table, tuple(f.o3_default for f in table.flags))


def render_flags(comb: Combination, table: GroupTable | None = None) -> list[str]:
    table = table or comb.table
    return [BASE_LEVEL] + [f.token(on) for f, on in zip(table.flags, comb.bits)]


def parse_flags(tokens: Iterable[str], table: GroupTable) -> Combination:
    """Inverse of :func:`render_flags`; later tokens override earlier ones, as in GCC."""
    states = {f.name: f.o3_default for f in table.flags}
    for tok in tokens:
        if tok == BASE_LEVEL:
            continue
        if tok.startswith("-fno-") and tok[5:] in states:
            states[tok[5:]] = False
        elif tok.startswith("-f") and tok[2:] in states:
            states[tok[2:]] = True
        else:
            raise ValueError(f"token {tok!r} is not a flag of this space")
    return Combination.from_mapping(table, states)
