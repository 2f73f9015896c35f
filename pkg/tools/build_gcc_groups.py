"""Regenerate src/grouptune/data/gcc-9.2.0.json.

Membership is fixed below: the first string of each group holds the
members printed in the published grouping table, the second string the
completion from GCC's optimizer documentation. O3 defaults are recorded
from ``<cc> -O3 -Q --help=optimizers --help=common`` of the compiler
given on the command line.

    python tools/build_gcc_groups.py [--cc gcc]
"""
import argparse
import json
import subprocess
from pathlib import Path

GROUPS = [
    ("Instruction Scheduling",
     "schedule-insns schedule-insns2 sel-sched-pipelining-outer-loops sched-stalled-insns",
     "sched-stalled-insns-dep sched-interblock sched-spec sched-spec-load sched-spec-load-dangerous "
     "sched-pressure sched-critical-path-heuristic sched-dep-count-heuristic sched-group-heuristic "
     "sched-last-insn-heuristic sched-rank-heuristic sched-spec-insn-heuristic sched2-use-superblocks "
     "selective-scheduling selective-scheduling2 sel-sched-pipelining sel-sched-reschedule-pipelined "
     "modulo-sched modulo-sched-allow-regmoves reschedule-modulo-scheduled-loops schedule-fusion "
     "live-range-shrinkage delayed-branch tracer"),
    ("Branch Optimization",
     "crossjumping thread-jumps compare-elim forward-propagate shrink-wrap-separate",
     "shrink-wrap if-conversion if-conversion2 guess-branch-probability reorder-blocks "
     "reorder-blocks-and-partition reorder-functions optimize-sibling-calls branch-count-reg "
     "hoist-adjacent-loads isolate-erroneous-paths-dereference isolate-erroneous-paths-attribute "
     "delete-null-pointer-checks"),
    ("Inline Optimization",
     "inline early-inlining inline-small-functions partial-inlining inline-functions",
     "inline-functions-called-once indirect-inlining keep-inline-functions inline-atomics"),
    ("Redundancy Elimination Optimization",
     "tree-pre tree-partial-pre code-hoisting tree-tail-merge", ""),
    ("Constant Propagation Optimization",
     "tree-ccp tree-bit-ccp ipa-bit-cp ipa-cp ipa-cp-clone ipa-vrp", ""),
    ("Alignment Optimization",
     "align-functions align-jumps align-labels align-loops", ""),
    ("Loop Optimization 1",
     "unroll-all-loops split-ivs-in-unroller unroll-loops variable-expansion-in-unroller web",
     "peel-loops move-loop-invariants rerun-cse-after-loop ira-loop-pressure prefetch-loop-arrays "
     "predictive-commoning loop-unroll-and-jam"),
    ("Loop Optimization 2",
     "tree-loop-optimize tree-scev-cprop split-loops version-loops-for-strides tree-ch",
     "tree-loop-im tree-loop-ivcanon ivopts tree-loop-distribution tree-loop-distribute-patterns "
     "tree-loop-if-convert tree-loop-vectorize tree-slp-vectorize loop-interchange unswitch-loops "
     "aggressive-loop-optimizations graphite graphite-identity loop-nest-optimize loop-parallelize-all "
     "loop-block loop-strip-mine tree-loop-linear"),
    ("GIMPLE Phase Optimization 1",
     "printf-return-value jump-tables tree-slsr split-paths optimize-strlen store-merging",
     "tree-switch-conversion tree-sink tree-reassoc tree-dominator-opts tree-lrs unconstrained-commons"),
    ("GIMPLE Phase Optimization 2",
     "tree-forwprop tree-sra tree-fre tree-vrp tree-dse strict-aliasing tree-dce ssa-phiopt",
     "tree-pta lifetime-dse delete-dead-exceptions non-call-exceptions unwind-tables "
     "asynchronous-unwind-tables trapv strict-volatile-bitfields fp-int-builtin-inexact"),
    ("IPA Phase Optimization",
     "devirtualize ipa-reference ipa-reference-addressable ipa-pta ipa-icf ipa-icf-variables",
     "ipa-icf-functions ipa-pure-const ipa-sra devirtualize-speculatively"),
    ("RTL Phase Optimization 1",
     "gcse gcse-lm gcse-las gcse-after-reload gcse-sm cse-follow-jumps dce dse",
     "cprop-registers expensive-optimizations ree auto-inc-dec combine-stack-adjustments peephole2 "
     "rename-registers caller-saves ipa-ra split-wide-types"),
    ("RTL Phase Optimization 2",
     "tree-phiprop stdarg-opt ssa-backprop tree-builtin-call-dce tree-cselim tree-copy-prop",
     "peephole function-cse"),
    ("Computation Optimization",
     "merge-constants cx-limited-range cx-fortran-rules short-wchar short-enums",
     "merge-all-constants float-store keep-static-functions ira-hoist-pressure ira-share-save-slots "
     "ira-share-spill-slots lra-remat ipa-profile ipa-stack-alignment limit-function-alignment "
     "cse-skip-blocks stack-protector stack-clash-protection vpt profile-reorder-functions "
     "branch-probabilities section-anchors"),
    ("Others",
     "tree-ter tree-coalesce-vars defer-pop conserve-stack semantic-interposition wrapv",
     "omit-frame-pointer plt toplevel-reorder zero-initialized-in-bss function-sections data-sections "
     "common keep-static-consts wrapv-pointer"),
]

NOTES = [
    "Members with source 'published' are printed in the published grouping table; "
    "'gcc-docs' members complete each group to its published size from the GCC 9.2.0 "
    "optimize-options documentation, assigned by pass-pipeline category.",
    "Excluded from the space: integer-valued flags and --param, composite switches "
    "(-ftree-vectorize, -ffast-math), the IEEE-altering math family "
    "(unsafe-math-optimizations, associative-math, reciprocal-math, finite-math-only, "
    "signed-zeros, trapping-math, rounding-math, signaling-nans, math-errno, "
    "single-precision-constant), and ABI-breaking -fpack-struct / -freg-struct-return.",
]


def o3_states(cc):
    out = subprocess.run(
        [cc, "-O3", "-Q", "--help=optimizers", "--help=common"],
        capture_output=True, text=True, check=True,
    ).stdout
    states = {}
    for line in out.splitlines():
        parts = line.split()
        if len(parts) >= 2 and parts[0].startswith("-f") and parts[1] in ("[enabled]", "[disabled]"):
            states.setdefault(parts[0][2:], parts[1] == "[enabled]")
    return states


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cc", default="gcc")
    ap.add_argument("--out", default=str(Path(__file__).parents[1] / "src/grouptune/data/gcc-9.2.0.json"))
    args = ap.parse_args()

    version = subprocess.run([args.cc, "-dumpfullversion"], capture_output=True, text=True).stdout.strip()
    states = o3_states(args.cc)
    groups = []
    for idx, (desc, verbatim, completed) in enumerate(GROUPS, start=1):
        members = [{"name": n, "o3_default": states.get(n, False), "source": "published"}
                   for n in verbatim.split()]
        members += [{"name": n, "o3_default": states.get(n, False), "source": "gcc-docs"}
                    for n in completed.split()]
        groups.append({"index": idx, "description": desc, "members": members})
    doc = {
        "compiler_id": "gcc-9.2.0",
        "o3_defaults_recorded_with": f"{Path(args.cc).name} {version}",
        "notes": NOTES,
        "groups": groups,
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {args.out}: {sum(len(g['members']) for g in groups)} flags")


if __name__ == "__main__":
    main()
