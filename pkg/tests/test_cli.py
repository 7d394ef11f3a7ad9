"""CLI behavior: wrapped operations, exit codes, determinism, JSON schemas."""

import json
from importlib import resources

import jsonschema

from bindsem.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def schema(name: str) -> dict:
    text = resources.files("bindsem").joinpath(f"schemas/{name}").read_text()
    return json.loads(text)


def test_check_accepted(capsys):
    code, out, _ = run(capsys, "check", "--sig", "lc")
    assert code == 0
    assert "signature accepted" in out


def test_check_rejected_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.sig"
    bad.write_text("op m 2 0 0;\neq b meta A:0 B:0 : m(A, A) = m(A, B) rewrite;\n")
    code, out, _ = run(capsys, "check", "--sig", str(bad))
    assert code == 2
    assert "FAIL" in out


def test_check_corpus_file(capsys):
    path = resources.files("bindsem").joinpath("sigs/lc_ex.sig")
    code, _, _ = run(capsys, "check", "--sig", str(path))
    assert code == 0


def test_trace_beta_chain(capsys):
    code, out, _ = run(
        capsys, "trace", "--sig", "lc_beta_eta",
        "--term", "app(abs(x. app(x,x)), abs(y.y))", "--max", "10",
    )
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 3  # two steps plus the final line
    assert lines[-1] == "final: abs(x0. x0)"


def test_fold_size(capsys):
    code, out, _ = run(
        capsys, "fold", "--sig", "lc", "--model", "size",
        "--term", "abs(x. app(x,x))",
    )
    assert code == 0
    assert out.strip() == "2"


def test_normalize_trace(capsys):
    code, out, _ = run(
        capsys, "normalize", "--sig", "monoid", "--term", "m(m(a,b),c)",
        "--scope", "a,b,c", "--trace",
    )
    assert code == 0
    assert out.strip().endswith("m(a, m(b, c))")


def test_normalize_budget_exit(capsys, tmp_path):
    loop = tmp_path / "loop.sig"
    loop.write_text("op f 1 0;\neq l meta A:0 : f(A) = f(f(A)) rewrite;\n")
    code, _, err = run(
        capsys, "normalize", "--sig", str(loop), "--term", "f(x)",
        "--scope", "x", "--budget", "40",
    )
    assert code == 3
    assert "budget" in err


def test_derive_no_derivation_exit(capsys):
    code, out, _ = run(
        capsys, "derive", "--sig", "lc_beta_eta", "--term", "x",
        "--scope", "x", "--target", "abs(q. q)", "--depth", "3",
    )
    assert code == 4


def test_derive_finds_target(capsys):
    code, out, _ = run(
        capsys, "derive", "--sig", "lc_beta_eta",
        "--term", "app(abs(x. x), abs(y. y))", "--target", "abs(y. y)",
    )
    assert code == 0
    assert "beta-red" in out


def test_step_json_schema(capsys):
    code, out, _ = run(
        capsys, "step", "--sig", "lc_beta_eta",
        "--term", "app(abs(x. x), y)", "--scope", "y", "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    jsonschema.validate(payload, schema("steps.schema.json"))
    assert any(r["rule"] == "beta-red" for r in payload["steps"])


def test_graph_json_schema(capsys):
    code, out, _ = run(
        capsys, "graph", "--sig", "lc_beta_eta",
        "--seeds", "app(abs(x. app(x, x)), abs(x. app(x, x)))",
        "--rules", "beta-red", "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    jsonschema.validate(payload, schema("graph.schema.json"))
    assert payload["edges"] == [{"src": 0, "dst": 0, "rule": "beta-red"}]


def test_graph_dot(capsys):
    code, out, _ = run(
        capsys, "graph", "--sig", "lc_beta_eta",
        "--seeds", "app(abs(x. x), y)", "--scope", "y", "--format", "dot",
    )
    assert code == 0
    assert out.startswith("digraph reduction {")
    assert "beta-red" in out


def test_laws_json_schema(capsys):
    code, out, _ = run(
        capsys, "laws", "--sig", "monoid", "--count", "40", "--seed", "3",
        "--format", "json",
    )
    assert code == 0
    payload = json.loads(out)
    jsonschema.validate(payload, schema("laws.schema.json"))
    assert all(r["ok"] for r in payload["results"])


def test_translate_term(capsys):
    code, out, _ = run(
        capsys, "translate", "--map", "lj-ll", "--term", "disj(a, b)",
        "--scope", "a,b",
    )
    assert code == 0
    assert out.strip() == "oplus(bang(a), bang(b))"


def test_translate_derivation(capsys):
    code, out, _ = run(
        capsys, "translate", "--map", "fix-lc", "--term", "fix(x. app(x, x))",
        "--derive-rule", "fix-exp",
    )
    assert code == 0
    assert out.startswith("trans:")


def test_state_layer_cbv(capsys):
    code, out, _ = run(
        capsys, "step", "--sig", "cbv_small", "--layer", "state",
        "--term", "app(v(abs(x. x)), v(abs(q. q)))",
    )
    assert code == 0
    assert out.splitlines()[0].startswith("beta:")


def test_state_layer_pi(capsys):
    code, out, _ = run(
        capsys, "step", "--sig", "pi", "--layer", "state",
        "--term", "par(out(a, b, zero()), in(a, c. out(c, c, zero())))",
        "--scope", "a,b",
    )
    assert code == 0
    assert "out(b, b, zero())" in out


def test_print_roundtrip(capsys):
    code, out, _ = run(capsys, "print", "--sig", "lc_ex")
    assert code == 0
    from bindsem import builtin, parse_signature

    assert parse_signature(out) == builtin("lc_ex")


def test_unknown_signature_errors(capsys):
    code, _, err = run(capsys, "check", "--sig", "nope")
    assert code == 2
    assert "error" in err


def test_deterministic_outputs(capsys):
    """Identical invocations (including seed) give byte-identical output."""
    invocations = [
        ("laws", "--sig", "lc_beta_eta", "--suite", "monad,reduction",
         "--count", "60", "--seed", "11", "--format", "json"),
        ("step", "--sig", "lc_beta_eta", "--term",
         "app(abs(x. app(x, x)), abs(y. y))", "--format", "json"),
        ("graph", "--sig", "lc_beta_eta", "--seeds",
         "app(abs(x. x), app(abs(y. y), z))", "--scope", "z",
         "--rules", "beta-red,app-cong1,app-cong2,abs-cong", "--format", "json"),
        ("trace", "--sig", "lc_ex", "--term",
         "app(abs(x. app(x, x)), abs(y. y))", "--format", "json"),
    ]
    for argv in invocations:
        first = run(capsys, *argv)
        second = run(capsys, *argv)
        assert first == second
        assert first[0] == 0


def test_laws_all_builtins_all_suites(capsys):
    """Every suite runs clean on every catalog signature."""
    from bindsem.laws import SUITES, run_suite
    from bindsem import builtin
    from bindsem.signature import BUILTIN_NAMES

    for name in BUILTIN_NAMES:
        doc = builtin(name)
        for suite in SUITES:
            r = run_suite(suite, doc, name, 25, seed=13)
            assert r.passed == r.cases, (name, suite)


def test_term_layer_rejected_on_stateful_docs(capsys):
    code, _, err = run(
        capsys, "step", "--sig", "cbv_small", "--term", "app(x, y)",
        "--scope", "x,y",
    )
    assert code == 2
    assert "het_step" in err
