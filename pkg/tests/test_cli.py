import json

import pytest

from birlift import isa, smt
from birlift.cli import CONTRACT_FAILS, ENVIRONMENT, LIFT_FAILS, OK, STRUCTURAL, TYPING_FAILS, main
from birlift.fixtures import (
    E2E_BASE,
    E2E_PRE_WEAK,
    e2e_binary,
    e2e_contract,
    pop_push_program,
    sample_sequence,
)
from birlift.sexpr import print_program

needs_solver = pytest.mark.skipif(not smt.solver_available(), reason="no SMT solver")

LOOP = [
    (0x10000000, isa.enc_add_imm(0, 0, 1, sub=True, setflags=True)),
    (0x10000004, isa.enc_bcond("ne", -4)),
]


def write_words(path, words):
    path.write_bytes(b"".join(w.to_bytes(4, "little") for _, w in words))
    return str(path)


@pytest.fixture
def ws(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def report(path):
    return json.loads(path.read_text())


def test_lift_writes_program_and_sidecar(ws, capsys):
    binf = write_words(ws / "s3.bin", sample_sequence())
    assert main(["lift", "--bin", binf, "--base", "0x10000004", "-o", "s3.bir"]) == OK
    text = (ws / "s3.bir").read_text()
    assert "(block 0x1000000c" in text
    meta = json.loads((ws / "s3.bir.meta.json").read_text())
    assert meta["memr"] == [["0x10000004", "0x10000010"]]
    assert len(meta["entry_labels"]) == 3


def test_lift_strict_rejects_unsupported(ws):
    binf = write_words(ws / "u.bin", [(0, 0x8B000020), (4, 0)])
    assert main(["lift", "--bin", binf, "--base", "0", "-o", "u.bir"]) == OK
    assert main(["lift", "--bin", binf, "--base", "0", "-o", "u.bir", "--strict"]) == LIFT_FAILS


def test_lift_bad_input(ws):
    (ws / "odd.bin").write_bytes(b"\x00" * 5)
    assert main(["lift", "--bin", "odd.bin", "--base", "0"]) == LIFT_FAILS
    assert main(["lift", "--bin", "missing.bin", "--base", "0"]) == ENVIRONMENT


def test_run_pop_push(ws, capsys):
    (ws / "pop_push.bir").write_text(print_program(pop_push_program()))
    (ws / "env").write_text(
        "(SP (const 32 0x100))\n(R1 (const 32 0x0))\n(MEM (mem 32 (0x100 0xef) (0x101 0xbe) (0x102 0xad) (0x103 0xde)))\n"
    )
    code = main(["run", "pop_push.bir", "--env", "env", "--labels", "0x400008", "--report", "r.json"])
    assert code == OK
    rep = report(ws / "r.json")
    assert rep["schema"] == "birlift.report/1"
    out = json.dumps(rep)
    assert "0x400008" in out and "0xdeadbeef" in out


def test_typecheck(ws):
    (ws / "ok.bir").write_text(print_program(pop_push_program()))
    assert main(["typecheck", "ok.bir"]) == OK
    (ws / "bad.bir").write_text("(block 0x0 (assert (const 8 0x1)) (jmp (const 64 0x4)))\n")
    assert main(["typecheck", "bad.bir", "--report", "r.json"]) == TYPING_FAILS
    assert report(ws / "r.json")["diagnostics"][0]["message"] == "condition must be Reg1"
    (ws / "junk.bir").write_text("(block\n")
    assert main(["typecheck", "junk.bir"]) == STRUCTURAL


def test_cfg(ws, capsys):
    (ws / "pop_push.bir").write_text(print_program(pop_push_program()))
    assert main(["cfg", "pop_push.bir", "-o", "g.json"]) == OK
    g = json.loads((ws / "g.json").read_text())
    assert g["edges"] == [["0x400000", "0x400004"], ["0x400004", "0x400008"]]
    assert g["cycle"] is None


def test_wp_and_simplify_and_prove(ws, capsys):
    (ws / "p.bir").write_text(
        "(declare X (reg 8))\n(declare Y (reg 8))\n(declare Z (reg 8))\n"
        "(block \"entry\" (assign Y (add X X)) (assign Z (add Y Y)) (jmp (label \"exit\")))\n"
    )
    (ws / "post").write_text('(post "exit" (eq Z (mul X (const 8 0x4))))\n')
    assert main(["wp", "p.bir", "--post", "post", "-o", "pre"]) == OK
    pre = (ws / "pre").read_text()
    assert "(subst (add X X) Y (subst (add Y Y) Z" in pre
    expr = pre[pre.index("(subst"):].rstrip()[:-1]
    (ws / "goal").write_text(
        f"(declare X (reg 8))\n(declare Y (reg 8))\n(declare Z (reg 8))\n(goal true {expr})\n"
    )
    assert main(["simplify", "goal", "-o", "goal2", "--stats"]) == OK
    simplified = (ws / "goal2").read_text()
    assert "subst" not in simplified and "Y_1" in simplified
    # an explicit substitution must be simplified before proving
    assert main(["prove", "goal"]) == STRUCTURAL
    if smt.solver_available():
        assert main(["prove", "goal2"]) == OK


def test_simplify_is_deterministic(ws, capsys):
    (ws / "goal").write_text("(declare X (reg 8))\n(declare Y (reg 8))\n(goal true (subst (add X X) Y (eq Y X)))\n")
    main(["simplify", "goal", "-o", "a"])
    main(["simplify", "goal", "-o", "b"])
    assert (ws / "a").read_text() == (ws / "b").read_text()


def test_cosim_command(ws, capsys):
    binf = write_words(ws / "s3.bin", sample_sequence())
    args = ["cosim", "--bin", binf, "--base", "0x10000004", "--trials", "100", "--steps", "3"]
    assert main(args + ["--report", "a.json"]) == OK
    assert main(args + ["--report", "b.json"]) == OK
    assert (ws / "a.json").read_text() == (ws / "b.json").read_text()
    assert "bounded" in capsys.readouterr().out


# -- cfg-integrity --------------------------------------------------------------------


def test_cfg_integrity_pop_push(ws, capsys):
    (ws / "pop_push.bir").write_text(print_program(pop_push_program()))
    (ws / "pre").write_text("(pre 0x400000 (eq (and SP (const 32 0x3)) (const 32 0x0)))\n")
    (ws / "g.json").write_text(json.dumps([["0x400000", "0x400004"], ["0x400004", "0x400008"]]))
    args = ["cfg-integrity", "--program", "pop_push.bir", "--pre", "pre", "--trials", "50"]
    assert main(args + ["--graph", "g.json"]) == OK
    (ws / "short.json").write_text(json.dumps([["0x400000", "0x400004"]]))
    assert main(args + ["--graph", "short.json", "--report", "r.json"]) == CONTRACT_FAILS
    v = report(ws / "r.json")["violation"]
    assert v["kind"] == "edge" and v["edge"] == ["0x400004", "0x400008"]


def test_cfg_integrity_ret_with_pinned_link_register(ws, capsys):
    base = 0x10000000
    binf = write_words(ws / "ret.bin", [(base, isa.NOP), (base + 4, isa.enc_ret())])
    (ws / "pre").write_text(f"(pre {base:#x} (eq R30 (const 64 0x20000000)))\n")
    (ws / "g.json").write_text(json.dumps([[hex(base), hex(base + 4)], [hex(base + 4), "0x20000000"]]))
    args = ["cfg-integrity", "--bin", binf, "--base", hex(base), "--pre", "pre", "--trials", "30"]
    assert main(args + ["--graph", "g.json"]) == OK
    # the same program without the return edge in the graph
    (ws / "g2.json").write_text(json.dumps([[hex(base), hex(base + 4)]]))
    assert main(args + ["--graph", "g2.json"]) == CONTRACT_FAILS


def test_cfg_integrity_malformed_graph(ws, capsys):
    (ws / "pop_push.bir").write_text(print_program(pop_push_program()))
    (ws / "pre").write_text("(pre 0x400000 true)\n")
    (ws / "g.json").write_text("{not json")
    assert main(["cfg-integrity", "--program", "pop_push.bir", "--pre", "pre", "--graph", "g.json"]) == STRUCTURAL


# -- verify ----------------------------------------------------------------------------


@needs_solver
def test_verify_end_to_end(ws, capsys):
    (ws / "e2e.bin").write_bytes(e2e_binary())
    (ws / "good").write_text(e2e_contract())
    (ws / "weak").write_text(e2e_contract(E2E_PRE_WEAK))
    args = ["verify", "--bin", "e2e.bin", "--base", hex(E2E_BASE), "--trials", "200"]
    assert main(args + ["--contract", "good", "--report", "a.json"]) == OK
    rep = report(ws / "a.json")
    assert rep["conditions"]["contract"]["status"] == "proved"
    assert rep["conditions"]["error_freedom"]["status"] == "proved"
    assert rep["stages"]["cosim"]["counts"]["related"] > 0
    main(args + ["--contract", "good", "--report", "b.json"])
    assert (ws / "a.json").read_text() == (ws / "b.json").read_text()

    assert main(args + ["--contract", "weak", "--report", "w.json"]) == CONTRACT_FAILS
    model = report(ws / "w.json")["stages"]["prove"]["contract"][hex(E2E_BASE)]["model"]
    assert "SP" in model


def test_verify_rejects_loops(ws, capsys):
    binf = write_words(ws / "loop.bin", LOOP)
    (ws / "c").write_text("(pre 0x10000000 true)\n(post 0x10000008 true)\n")
    code = main(["verify", "--bin", binf, "--base", "0x10000000", "--contract", "c", "--trials", "50"])
    assert code == STRUCTURAL
    assert "not loop-free" in capsys.readouterr().out


def test_verify_unknown_label(ws, capsys):
    (ws / "e2e.bin").write_bytes(e2e_binary())
    (ws / "c").write_text("(pre 0x1 true)\n(post 0x10000030 true)\n")
    assert main(["verify", "--bin", "e2e.bin", "--base", hex(E2E_BASE), "--contract", "c", "--trials", "20"]) == STRUCTURAL


def test_environment_error_without_solver(ws, capsys, monkeypatch):
    monkeypatch.setenv(smt.SOLVER_ENV, "/nonexistent/z3")
    (ws / "goal").write_text("(declare X (reg 8))\n(goal true (eq X X))\n")
    assert main(["prove", "goal"]) == ENVIRONMENT


def test_cfg_integrity_loop_within_graph_is_not_a_violation(ws, capsys):
    (ws / "loop.bir").write_text(
        "(declare B (reg 1))\n"
        '(block "a" (jmp (label "b")))\n'
        '(block "b" (cjmp B (label "a") (label "out")))\n'
    )
    (ws / "pre").write_text('(pre "a" true)\n')
    (ws / "g.json").write_text(json.dumps([["a", "b"], ["b", "a"], ["b", "out"]]))
    args = ["cfg-integrity", "--program", "loop.bir", "--pre", "pre", "--graph", "g.json",
            "--trials", "20", "--fuel", "50", "--report", "r.json"]
    assert main(args) == OK
    rep = report(ws / "r.json")
    assert rep["diverged"] > 0 and rep["violation"] is None
