"""Smoke test for the `folk` extension module.

Build and install first:
    pip install --no-build-isolation ./crates/py
then run from the repository root:
    python python/smoke_test.py
"""

import json
import pathlib
import sys

import folk

ROOT = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures" / "worked_example"


def main() -> int:
    p = folk.parse_predicate("Won(Lubabalo Kondlo,  a silver medal) ::: Verify the medal")
    assert p["name"] == "Won", p
    assert p["args"] == ["Lubabalo Kondlo", "a silver medal"], p
    assert p["rendered"] == "Won(Lubabalo Kondlo, a silver medal) ::: Verify the medal", p

    clause = folk.parse_clause("A(x) ::: first\nB(y, z) ::: second\n")
    assert [c.split(" :::")[0] for c in clause] == ["A(x)", "B(y, z)"], clause

    f1 = folk.macro_f1(["SUPPORTED", "NOT_SUPPORTED", "UNKNOWN"], ["SUPPORTED", "NOT_SUPPORTED", "NOT_SUPPORTED"])
    assert abs(f1 - (1.0 + 2 / 3) / 2) < 1e-12, f1

    names = folk.template_names()
    assert len(names) == 6, names
    prompt = folk.render_template("folk_decompose", "Some claim.")
    assert "Claim: Some claim.\n" in prompt[-100:], prompt[-200:]

    claim = (FIXTURES / "claim.txt").read_text().strip()
    code, out, err = folk.run(
        [
            "verify",
            "--strategy", "folk",
            "--backend", f"replay:{FIXTURES / 'replay.ndjson'}",
            "--corpus", str(FIXTURES / "corpus.ndjson"),
            "--json",
            claim,
        ],
        env={},
    )
    assert code == 0, err
    trace = json.loads(out)
    assert trace["final_label"] == "NOT_SUPPORTED", trace["final_label"]
    assert len(trace["citations"]) == 2, trace["citations"]

    code, _, err = folk.run(["verify", "--strategy", "nonsense", "x"], env={})
    assert code == 1, (code, err)

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
