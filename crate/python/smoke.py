"""Smoke test for the tracecheck_py extension module.

Build and install it first:

    pip install maturin
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/tracecheck_py-*.whl
"""

import json
import pathlib
import sys

import tracecheck_py as tc

ROOT = pathlib.Path(__file__).resolve().parent.parent
TRACES = ROOT / "crates" / "core" / "traces"


def check(cond, msg):
    if not cond:
        print("FAIL:", msg)
        sys.exit(1)
    print("ok:", msg)


def main():
    names = tc.graph_names()
    check("open" in names and len(names) == 7, f"bundled graphs {names}")
    check(tc.graph_dot("close").startswith('digraph "close"'), "dot rendering")
    check(tc.validate_graph("close") == [], "close graph validates")

    golden = tc.Trace.read(str(TRACES / "open_create.jsonl"))
    result = golden.replay()
    check(result.status == "Success" and result.journal() == [], f"golden trace replays clean: {result!r}")
    check(tc.Trace.parse(golden.to_jsonl()).to_jsonl() == golden.to_jsonl(), "round trip")

    clean = tc.generate(json.dumps({"seed": 42, "n_calls": 200}))
    check(len(clean) == 200 and clean.has_final_snapshot(), f"generated {clean!r}")
    check(clean.replay().max_severity is None, "fault-free trace has an empty journal")

    faulty = tc.generate(json.dumps({
        "seed": 42,
        "n_calls": 200,
        "faults": [{"kind": "WrongGrant", "trigger": {"name": "open"}}],
    }))
    r = faulty.replay()
    crit = [e for e in r.journal() if e["severity"] == "CRIT"]
    check(r.status == "Failure" and len(crit) == 1 and crit[0]["seq"] == r.calls_processed,
          f"wrong grant flagged at seq {r.calls_processed}")
    check(0.0 <= r.conjunct_coverage() <= 1.0 and "guard_conjuncts" in r.coverage(), "coverage report")

    try:
        tc.generate(json.dumps({"seed": 1}))
    except ValueError as e:
        check("n_calls" in str(e), "invalid config raises ValueError")
    else:
        check(False, "invalid config accepted")
    print("all smoke checks passed")


if __name__ == "__main__":
    main()
