"""Mitigation fixes, the re-encoding search, and the end-to-end driver."""
import itertools

import pytest

from fsmguard import (
    Encoding,
    MitigationError,
    Rule,
    RuleConfig,
    SourceText,
    VulnClass,
    add_default_arm,
    apply_encoding_assignment,
    emit_verilog,
    extract_stg,
    hamming_distance,
    mitigate,
    parse_source,
    plan_injection,
    reencode_states,
    remove_static_deadlock,
    remove_unreachable_state,
    run_all_checks,
    score_assignment,
    stg_isomorphic_modulo_encoding,
    uniquify_encodings,
    unprotected_transitions,
)

from conftest import design_ast, design_source, design_stg
from test_stg import make_stg


# -- add_default_arm ------------------------------------------------------------

def test_add_default_matches_listing8_arms():
    ast = design_ast("aes_ctrl")
    fixed = add_default_arm(ast, "WAIT_KEY")
    reference = design_ast("aes_ctrl_default")
    assert fixed.comb.default_arm is not None
    assert fixed.comb.default_arm.body == reference.comb.default_arm.body
    report = run_all_checks(emit_verilog(fixed), {"WAIT_KEY"})
    assert Rule.MISSING_DEFAULT not in report.violated_rules


def test_add_default_requires_absence():
    with pytest.raises(MitigationError):
        add_default_arm(design_ast("aes_ctrl_default"), "WAIT_KEY")


def test_add_default_undeclared_target():
    with pytest.raises(MitigationError):
        add_default_arm(design_ast("aes_ctrl"), "NOWHERE")


# -- reencode_states -------------------------------------------------------------

def brute_force_min_residual(stg, protected=frozenset()):
    names = stg.state_names
    prot = set(protected) | set(stg.protected_names)
    edges = [(t.source, t.target) for t in unprotected_transitions(stg)
             if t.source != t.target]
    best = len(edges) + 1
    for perm in itertools.permutations(range(2 ** stg.width), len(names)):
        mapping = dict(zip(names, perm))
        cost = sum(1 for a, b in edges
                   if bin(mapping[a] ^ mapping[b]).count("1") != 1)
        best = min(best, cost)
    return best


def test_reencode_aes_reaches_zero_residual():
    stg = design_stg("aes_ctrl", {"WAIT_KEY"})
    assignment = reencode_states(stg, {"WAIT_KEY"})
    assert assignment.residual_count == 0
    assert assignment.residual_count == brute_force_min_residual(stg, {"WAIT_KEY"})
    codes = set(assignment.mapping.values())
    assert len(codes) == len(assignment.mapping)  # injective


def test_reencode_two_states_one_bit():
    stg = make_stg({"A": "0", "B": "1"}, [("A", "B"), ("B", "A")], "A")
    assignment = reencode_states(stg)
    assert assignment.residual_count == 0
    assert {str(e) for e in assignment.mapping.values()} == {"0", "1"}


def test_reencode_too_many_states():
    codes = {f"s{i}": format(i, "03b") for i in range(8)}
    stg = make_stg(codes, [("s0", "s1")], "s0")
    squeezed = make_stg({**codes, "s8": "000"}, [("s0", "s1")], "s0")
    with pytest.raises(MitigationError):
        reencode_states(squeezed)


def test_reencode_ties_break_lexicographically():
    stg = design_stg("aes_ctrl", {"WAIT_KEY"})
    a = reencode_states(stg, {"WAIT_KEY"})
    b = reencode_states(stg, {"WAIT_KEY"})
    assert a.mapping == b.mapping
    # declaration-ordered assignment is the smallest zero-residual one:
    # checked against an exhaustive scan
    names = stg.state_names
    edges = [(t.source, t.target) for t in unprotected_transitions(stg)]
    best = None
    for perm in itertools.permutations(range(8), len(names)):
        mapping = dict(zip(names, perm))
        cost = sum(1 for x, y in edges if bin(mapping[x] ^ mapping[y]).count("1") != 1)
        if cost == 0 and (best is None or perm < best):
            best = perm
    got = tuple(int(a.mapping[n].bits, 2) for n in names)
    assert got == best


def test_reencode_matches_bruteforce_on_random_stgs():
    import random
    rng = random.Random(7)
    for _ in range(6):
        n = rng.randint(3, 5)
        names = [f"s{i}" for i in range(n)]
        codes = {name: format(i, "03b") for i, name in enumerate(names)}
        edges = {(rng.choice(names), rng.choice(names)) for _ in range(rng.randint(2, 7))}
        stg = make_stg(codes, sorted(edges), names[0])
        assignment = reencode_states(stg)
        assert assignment.residual_count == brute_force_min_residual(stg)


def test_reencode_4bit_case_matches_bruteforce():
    codes = {"a": "0000", "b": "0001", "c": "0010", "d": "0011"}
    stg = make_stg(codes, [("a", "b"), ("b", "c"), ("c", "d"), ("d", "a"), ("a", "c")],
                   "a")
    assignment = reencode_states(stg)
    assert assignment.residual_count == brute_force_min_residual(stg)


def test_score_assignment_listing8():
    stg = design_stg("aes_ctrl_default", {"WAIT_KEY"})
    mapping = {s.name: s.encoding for s in stg.states}
    assert score_assignment(stg, mapping) == [("FINAL_ROUND", "WAIT_DATA")]


# -- deadlock / unreachable / duplicates --------------------------------------------

def test_remove_deadlock_clears_flag():
    src = design_source("vending_deadlock")
    ast = design_ast("vending_deadlock")
    fixed = remove_static_deadlock(ast, "DEADLOCK_STATE", "IDLE")
    report = run_all_checks(emit_verilog(fixed))
    assert Rule.STATIC_DEADLOCK not in report.violated_rules


def test_remove_deadlock_same_state_errors():
    ast = design_ast("vending_deadlock")
    with pytest.raises(MitigationError):
        remove_static_deadlock(ast, "DEADLOCK_STATE", "DEADLOCK_STATE")


def test_remove_deadlock_requires_flagged_state():
    ast = design_ast("vending")
    with pytest.raises(MitigationError):
        remove_static_deadlock(ast, "IDLE", "ACCEPTING_COINS")


def test_remove_trap_by_exiting_one_member():
    ast = design_ast("vending")
    injected, plan = plan_injection(VulnClass.CWE835_TRAP, ast, 5)
    member = plan.added_states[0]
    fixed = remove_static_deadlock(injected, member, "IDLE")
    report = run_all_checks(emit_verilog(fixed))
    assert Rule.TRAP_LOOP_CWE835 not in report.violated_rules
    assert Rule.STATIC_DEADLOCK not in report.violated_rules


def test_remove_unreachable_listing6():
    ast = design_ast("fsm_review")
    fixed = remove_unreachable_state(ast, "s3")
    emitted = emit_verilog(fixed)
    report = run_all_checks(emitted)
    assert Rule.UNREACHABLE_STATE not in report.violated_rules
    assert parse_source(emitted).expect_ast() == fixed  # round trip survives


def test_remove_unreachable_refuses_reset():
    ast = design_ast("fsm_review")
    with pytest.raises(MitigationError):
        remove_unreachable_state(ast, "s0")


def test_remove_unreachable_refuses_reachable():
    ast = design_ast("fsm_review")
    with pytest.raises(MitigationError):
        remove_unreachable_state(ast, "s2")


def test_uniquify_assigns_lowest_free_code():
    ast = design_ast("vending")
    injected, plan = plan_injection(VulnClass.DUPLICATE_ENCODING, ast, 3)
    fixed = uniquify_encodings(injected)
    report = run_all_checks(emit_verilog(fixed))
    assert Rule.DUPLICATE_ENCODING not in report.violated_rules
    seen = [p.bits for p in fixed.parameters]
    assert len(seen) == len(set(seen))


def test_uniquify_without_duplicates_errors():
    with pytest.raises(MitigationError):
        uniquify_encodings(design_ast("vending"))


# -- mitigate driver -----------------------------------------------------------------

def test_mitigate_aes_full_repair(aes_ctrl):
    report = run_all_checks(aes_ctrl, {"WAIT_KEY"})
    outcome = mitigate(aes_ctrl, report)
    assert {r.value for r in outcome.fixed} == {"HD_NOT_ONE", "MISSING_DEFAULT"}
    assert outcome.residual == []
    assert outcome.stg_preserved
    recheck = run_all_checks(outcome.design, {"WAIT_KEY"})
    assert recheck.violations == []


def test_mitigate_clean_design_is_identity(vending):
    report = run_all_checks(vending)
    outcome = mitigate(vending, report)
    assert outcome.fixed == []
    assert outcome.residual == []
    original = emit_verilog(design_ast("vending")).content
    assert outcome.design.content == original


def test_mitigate_only_touches_relevant_rule(vending):
    ast = design_ast("vending")
    injected, _ = plan_injection(VulnClass.DUPLICATE_ENCODING, ast, 8)
    src = emit_verilog(injected)
    report = run_all_checks(src)
    outcome = mitigate(src, report)
    assert [r.value for r in outcome.fixed] == ["DUPLICATE_ENCODING"]
    assert outcome.residual == []


@pytest.mark.parametrize("vuln", [VulnClass.DUPLICATE_ENCODING,
                                  VulnClass.UNREACHABLE_STATE,
                                  VulnClass.STATIC_DEADLOCK,
                                  VulnClass.CWE835_TRAP,
                                  VulnClass.MISSING_DEFAULT])
@pytest.mark.parametrize("base", ["vending", "aes_ctrl_default", "rsa_ctrl"])
def test_mitigate_clears_every_injection(vuln, base, ):
    ast = design_ast(base)
    injected, _ = plan_injection(vuln, ast, seed=31)
    src = emit_verilog(injected)
    report = run_all_checks(src)
    outcome = mitigate(src, report)
    assert outcome.residual == []
    recheck = run_all_checks(outcome.design)
    assert recheck.violations == []


def test_mitigate_nonregression_no_new_rules(clean_bases):
    for base in clean_bases:
        ast = parse_source(base).expect_ast()
        for vuln in VulnClass:
            injected, _ = plan_injection(vuln, ast, seed=17)
            src = emit_verilog(injected)
            before = run_all_checks(src)
            outcome = mitigate(src, before)
            after = run_all_checks(outcome.design)
            assert after.violated_rules <= before.violated_rules


def test_mitigate_soundness_fixed_rules_stay_fixed(aes_ctrl):
    report = run_all_checks(aes_ctrl, {"WAIT_KEY"})
    outcome = mitigate(aes_ctrl, report)
    recheck = run_all_checks(outcome.design, {"WAIT_KEY"})
    for rule in outcome.fixed:
        assert rule not in recheck.violated_rules


def test_mitigate_deterministic(aes_ctrl):
    report = run_all_checks(aes_ctrl, {"WAIT_KEY"})
    a = mitigate(aes_ctrl, report).design.content
    b = mitigate(aes_ctrl, report).design.content
    assert a == b


def test_uniquify_pigeonhole_error():
    text = """module m (input clk, input rst);
parameter A = 1'b0;
parameter B = 1'b0;
parameter C = 1'b1;
reg s;
reg n;
always @(posedge clk) begin if (rst) s <= A; else s <= n; end
always @(*) begin case (s) A: n = B; B: n = C; C: n = A; endcase end
endmodule"""
    ast = parse_source(SourceText(text)).expect_ast()
    with pytest.raises(MitigationError, match="not enough unused codes"):
        uniquify_encodings(ast)
