import json
import os
import stat
import sys
import textwrap

import pytest

from grouptune.options import FlagSpec, GroupTable, OptionGroup, load_shipped_table


class ScriptedRng:
    """Replays a fixed sequence of draws; floats feed random(), ints feed randrange()."""

    def __init__(self, draws):
        self.draws = list(draws)
        self.pos = 0

    def _next(self):
        if self.pos >= len(self.draws):
            raise AssertionError("scripted rng ran out of draws")
        v = self.draws[self.pos]
        self.pos += 1
        return v

    def random(self):
        v = self._next()
        assert isinstance(v, float), f"draw {self.pos - 1}: expected float, got {v!r}"
        return v

    def randrange(self, n):
        v = self._next()
        assert isinstance(v, int) and 0 <= v < n, f"draw {self.pos - 1}: bad index {v!r} for n={n}"
        return v

    def uniform(self, a, b):
        return a + (b - a) * self.random()


def make_table(spec, compiler_id="test"):
    """spec: list of groups, each a list of (name, o3_default) or names."""
    groups = []
    for i, members in enumerate(spec, start=1):
        flags = tuple(FlagSpec(m, False) if isinstance(m, str) else FlagSpec(*m) for m in members)
        groups.append(OptionGroup(i, f"group {i}", flags))
    return GroupTable(compiler_id, tuple(groups))


@pytest.fixture(scope="session")
def shipped():
    return load_shipped_table()


@pytest.fixture
def small_table():
    return make_table([[("a", True), ("b", False), ("c", True)], [("d", False), ("e", True), ("f", False)]])


STUB = r'''
import json, os, shlex, stat, sys
args = sys.argv[1:]
out = args[args.index("-o") + 1]
spec = json.load(open([a for a in args if a.endswith(".json")][0]))
flags = set(a for a in args if a.startswith("-"))
if spec.get("fail_if") in flags:
    sys.stderr.write("stub: refusing to compile\n")
    sys.exit(1)
text = spec.get("stdout", "hello\n")
if spec.get("mismatch_if") in flags:
    # flip the last byte
    text = text[:-1] + chr(ord(text[-1]) ^ 1)
with open(out + ".txt", "w") as fh:
    fh.write(text)
counter = out + ".count"
if os.path.exists(counter):
    os.unlink(counter)
durations = " ".join(str(d) for d in spec.get("durations", [0]))
exit_code = 3 if spec.get("crash_if") in flags else 0
script = f"""#!/bin/sh
n=$(cat {shlex.quote(counter)} 2>/dev/null || echo 0)
echo $((n + 1)) > {shlex.quote(counter)}
set -- {durations}
shift $((n % $#))
sleep $1
cat {shlex.quote(out + '.txt')}
exit {exit_code}
"""
with open(out, "w") as fh:
    fh.write(script)
os.chmod(out, os.stat(out).st_mode | stat.S_IEXEC)
'''


@pytest.fixture
def stub_cc(tmp_path):
    path = tmp_path / "stubcc"
    path.write_text(f"#!{sys.executable}\n" + STUB)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


@pytest.fixture
def stub_bench(tmp_path):
    """Writes a stub program description + manifest; returns a factory."""

    def factory(**program):
        src = tmp_path / "prog.json"
        src.write_text(json.dumps(program))
        manifest = tmp_path / "bench.json"
        manifest.write_text(json.dumps({"sources": [src.name], "run_command": ["{bin}"], "timeout": 10}))
        return manifest

    return factory
