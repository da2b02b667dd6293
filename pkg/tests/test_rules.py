"""Security rules: FIF metric, HD, deadlock, trap, unreachable, duplicates,
default handling, and the aggregate report."""
import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fsmguard import (
    Encoding,
    Guard,
    Rule,
    RuleConfig,
    RuleError,
    SourceText,
    State,
    Stg,
    Transition,
    check_default_handling,
    check_fif_rule,
    check_hd_rule,
    detect_duplicate_encodings,
    detect_static_deadlock,
    detect_trap_loops,
    detect_unreachable_states,
    extract_stg,
    fif_metric,
    hamming_distance,
    parse_source,
    run_all_checks,
    unprotected_transitions,
)

from conftest import design_ast, design_source, design_stg
from test_stg import make_stg


# -- FIF metric ------------------------------------------------------------------

def test_fif_worked_example_zero():
    res = fif_metric(Encoding("010"), Encoding("011"), Encoding("000"))
    assert [v for _, v in res.per_bit] == [0, 0, 1]
    assert res.overall == 0


def test_fif_idle_to_init():
    res = fif_metric(Encoding("1000"), Encoding("1100"), Encoding("1110"))
    assert [v for _, v in res.per_bit] == [1, 1, 0, 0]
    assert res.overall == 0


def test_fif_all_ones():
    res = fif_metric(Encoding("1111"), Encoding("1111"), Encoding("1111"))
    assert [v for _, v in res.per_bit] == [1, 1, 1, 1]
    assert res.overall == 1


def test_fif_width_mismatch():
    with pytest.raises(RuleError):
        fif_metric(Encoding("01"), Encoding("011"), Encoding("010"))


def _oracle_fif(bx: str, by: str, bp: str) -> int:
    # independent truth-table evaluation, bit by bit
    product = 1
    for x, y, p in zip(bx, by, bp):
        x, y, p = int(x), int(y), int(p)
        xor = 1 if x != y else 0
        and_ = 1 if (x == 1 and p == 1) else 0
        or_ = 1 if (xor == 1 or and_ == 1) else 0
        product = product * or_
    return product


def test_fif_matches_oracle_on_all_3bit_triples():
    codes = [format(i, "03b") for i in range(8)]
    for bx, by, bp in itertools.product(codes, repeat=3):
        got = fif_metric(Encoding(bx), Encoding(by), Encoding(bp)).overall
        assert got == _oracle_fif(bx, by, bp), (bx, by, bp)


_enc3 = st.integers(min_value=0, max_value=7).map(lambda i: format(i, "03b"))


@given(_enc3, _enc3, _enc3, st.permutations([0, 1, 2]))
def test_fif_invariant_under_bit_permutation(bx, by, bp, perm):
    def permute(bits):
        return "".join(bits[i] for i in perm)
    base = fif_metric(Encoding(bx), Encoding(by), Encoding(bp)).overall
    swapped = fif_metric(Encoding(permute(bx)), Encoding(permute(by)),
                         Encoding(permute(bp))).overall
    assert base == swapped


@given(_enc3, _enc3)
def test_fif_self_transition_closed_form(bx, bp):
    # for bx == by the product collapses to AND over (bx_i AND bp_i)
    expected = 1
    for x, p in zip(bx, bp):
        expected &= int(x) & int(p)
    assert fif_metric(Encoding(bx), Encoding(bx), Encoding(bp)).overall == expected


# -- FIF rule over an STG -----------------------------------------------------------

def test_fif_rule_rsa_clean():
    stg = design_stg("rsa_ctrl", {"RESULT"})
    assert check_fif_rule(stg) == []


def test_fif_rule_flags_full_flip():
    stg = make_stg({"P": "111", "A": "111", "B": "000"},
                   [("A", "B")], "A", protected={"P"})
    # A(111) -> B(000) toward P(111): every per-bit term is 1
    (v,) = check_fif_rule(stg)
    assert v.rule is Rule.FIF_NONZERO
    assert v.transition == ("A", "B")
    assert v.evidence["fif"]["overall"] == 1


def test_fif_rule_requires_protected():
    with pytest.raises(RuleError):
        check_fif_rule(design_stg("vending"))


# -- HD rule -------------------------------------------------------------------------

def test_hd_rule_aes_golden():
    found = {(v.states[0], v.states[1]): v.evidence["hamming_distance"]
             for v in check_hd_rule(design_stg("aes_ctrl", {"WAIT_KEY"}))}
    assert found == {
        ("WAIT_DATA", "INITIAL_ROUND"): 2,
        ("DO_ROUND", "FINAL_ROUND"): 3,
        ("FINAL_ROUND", "WAIT_DATA"): 2,
    }


def test_hd_rule_listing8_residual():
    found = [(v.states[0], v.states[1], v.evidence["hamming_distance"])
             for v in check_hd_rule(design_stg("aes_ctrl_default", {"WAIT_KEY"}))]
    assert found == [("FINAL_ROUND", "WAIT_DATA", 3)]


def test_hd_rule_consistent_with_unprotected_transitions():
    for name, protected in (("aes_ctrl", {"WAIT_KEY"}), ("rsa_ctrl", {"RESULT"})):
        stg = design_stg(name, protected)
        flagged = {v.transition for v in check_hd_rule(stg, include_self_edges=True)}
        expected = {(t.source, t.target) for t in unprotected_transitions(stg)
                    if hamming_distance(stg.encoding_of(t.source),
                                        stg.encoding_of(t.target)) != 1}
        assert flagged == expected


def test_hd_rule_self_edge_config():
    stg = make_stg({"P": "00", "A": "01", "B": "10"},
                   [("A", "A"), ("A", "B")], "A", protected={"P"})
    default = {v.transition for v in check_hd_rule(stg)}
    widened = {v.transition for v in check_hd_rule(stg, include_self_edges=True)}
    assert default == {("A", "B")}
    assert widened == {("A", "A"), ("A", "B")}


# -- deadlock ---------------------------------------------------------------------

def test_deadlock_vending_injected():
    (v,) = detect_static_deadlock(design_stg("vending_deadlock"))
    assert v.states == ("DEADLOCK_STATE",)
    assert "IDLE" in v.evidence["entered_from"]


def test_deadlock_clean_base():
    assert detect_static_deadlock(design_stg("vending")) == []


def test_deadlock_needs_distinct_feeder():
    # a reset state that self-loops until an input is not a deadlock
    stg = make_stg({"A": "0", "B": "1"}, [("A", "A"), ("A", "B"), ("B", "A")], "A")
    assert detect_static_deadlock(stg) == []


# -- trap loops --------------------------------------------------------------------

def test_trap_two_state_cycle():
    stg = make_stg({"R": "00", "A": "01", "B": "10"},
                   [("R", "A"), ("A", "B"), ("B", "A")], "R")
    (v,) = detect_trap_loops(stg)
    assert set(v.states) == {"A", "B"}


def test_trap_whole_machine_is_not_a_trap():
    assert detect_trap_loops(design_stg("vending")) == []


def test_trap_subsumed_by_deadlock():
    stg = design_stg("vending_deadlock")
    assert detect_trap_loops(stg) == []
    assert len(detect_static_deadlock(stg)) == 1


def _random_stg(rng: random.Random):
    n = rng.randint(2, 8)
    names = [f"s{i}" for i in range(n)]
    codes = {name: format(i, "04b") for i, name in enumerate(names)}
    edges = []
    for _ in range(rng.randint(1, 2 * n)):
        edges.append((rng.choice(names), rng.choice(names)))
    return make_stg(codes, edges, names[0])


def _oracle_reachable(stg) -> set:
    succ = {}
    for t in stg.transitions:
        succ.setdefault(t.source, set()).add(t.target)
    seen, work = {stg.reset_state}, [stg.reset_state]
    while work:
        cur = work.pop()
        for nxt in succ.get(cur, ()):
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return seen


def _oracle_deadlocks(stg) -> set:
    reach = _oracle_reachable(stg)
    out = {}
    inc = {}
    for t in stg.transitions:
        out.setdefault(t.source, set()).add(t.target)
        inc.setdefault(t.target, set()).add(t.source)
    result = set()
    for name in reach:
        successors = out.get(name, set())
        if successors - {name}:
            continue
        if (inc.get(name, set()) - {name}) & reach:
            result.add(name)
    return result


def _oracle_traps(stg) -> set:
    # independent SCC computation (Kosaraju) + sink-component test
    reach = _oracle_reachable(stg)
    succ = {n: set() for n in reach}
    pred = {n: set() for n in reach}
    for t in stg.transitions:
        if t.source in reach and t.target in reach:
            succ[t.source].add(t.target)
            pred[t.target].add(t.source)
    order = []
    seen = set()

    def dfs1(node):
        stack = [(node, iter(succ[node]))]
        seen.add(node)
        while stack:
            cur, it = stack[-1]
            for nxt in it:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append((nxt, iter(succ[nxt])))
                    break
            else:
                order.append(cur)
                stack.pop()

    for node in sorted(reach):
        if node not in seen:
            dfs1(node)
    comp = {}
    for root in reversed(order):
        if root in comp:
            continue
        members = []
        work = [root]
        comp[root] = root
        while work:
            cur = work.pop()
            members.append(cur)
            for nxt in pred[cur]:
                if nxt not in comp:
                    comp[nxt] = root
                    work.append(nxt)
    groups = {}
    for node, root in comp.items():
        groups.setdefault(root, set()).add(node)
    traps = set()
    for members in groups.values():
        if members == reach:
            continue
        if len(members) == 1:
            (m,) = members
            if m not in succ[m]:
                continue
        if any(t not in members for m in members for t in succ[m]):
            continue
        deadlockish = {m for m in members if not (succ[m] - {m})} & _oracle_deadlocks(stg)
        if members <= deadlockish:
            continue
        traps.add(frozenset(members))
    return traps


def test_graph_rules_match_oracles_on_200_random_stgs():
    rng = random.Random(2024)
    for _ in range(200):
        stg = _random_stg(rng)
        got_dead = {v.states[0] for v in detect_static_deadlock(stg)}
        assert got_dead == _oracle_deadlocks(stg)
        got_traps = {frozenset(v.states) for v in detect_trap_loops(stg)}
        assert got_traps == _oracle_traps(stg)
        # subsumption: never both reports for one state set
        for trap in got_traps:
            assert not (trap & got_dead and len(trap) == 1)


# -- unreachable --------------------------------------------------------------------

def test_unreachable_fsm_review():
    (v,) = detect_unreachable_states(design_stg("fsm_review"))
    assert v.states == ("s3",)
    assert v.evidence["variant"] == "with-outgoing"
    assert v.evidence["exits_to"] == ["s0"]


def test_unreachable_none_in_aes():
    assert detect_unreachable_states(design_stg("aes_ctrl")) == []


def test_unreachable_isolated_variant():
    text = """module m (input clk, input rst);
parameter A = 2'b00;
parameter B = 2'b01;
parameter GHOST = 2'b10;
reg [1:0] s;
reg [1:0] n;
always @(posedge clk) begin if (rst) s <= A; else s <= n; end
always @(*) begin
n = A;
case (s)
A: n = B;
B: n = A;
endcase
end
endmodule"""
    stg = extract_stg(parse_source(SourceText(text)).expect_ast())
    # GHOST has an arm-less fallthrough to the leading default, so it still
    # "exits"; the isolated variant needs no leading default either.
    (v,) = detect_unreachable_states(stg)
    assert v.states == ("GHOST",)


# -- duplicates ----------------------------------------------------------------------

def test_duplicates_direct_pair():
    stg = make_stg({"A": "010", "B": "010", "C": "001"}, [("A", "B"), ("B", "C"), ("C", "A")], "A")
    (v,) = detect_duplicate_encodings(stg)
    assert v.states == ("A", "B")
    assert v.evidence["encoding"] == "010"


def test_duplicates_none_in_aes():
    assert detect_duplicate_encodings(design_stg("aes_ctrl")) == []


@pytest.mark.parametrize("k", [2, 3, 4])
def test_duplicates_pairwise_count(k):
    codes = {f"s{i}": "110" for i in range(k)}
    codes["extra"] = "001"
    stg = make_stg(codes, [(f"s{i}", "extra") for i in range(k)], "s0")
    assert len(detect_duplicate_encodings(stg)) == k * (k - 1) // 2


# -- default handling ----------------------------------------------------------------

def test_default_missing_in_aes():
    ast = design_ast("aes_ctrl")
    (v,) = check_default_handling(ast, extract_stg(ast))
    assert v.evidence["unused_encodings"] == ["101", "110", "111"]


def test_default_present_in_listing8():
    ast = design_ast("aes_ctrl_default")
    assert check_default_handling(ast, extract_stg(ast)) == []


def test_default_not_needed_with_full_coverage():
    text = """module m (input clk, input rst);
parameter A = 1'b0;
parameter B = 1'b1;
reg s;
reg n;
always @(posedge clk) begin if (rst) s <= A; else s <= n; end
always @(*) begin case (s) A: n = B; B: n = A; endcase end
endmodule"""
    ast = parse_source(SourceText(text)).expect_ast()
    assert check_default_handling(ast, extract_stg(ast)) == []


def test_leading_default_counts_as_handling():
    ast = design_ast("fsm_review")
    assert check_default_handling(ast, extract_stg(ast)) == []


# -- aggregation -----------------------------------------------------------------------

def test_run_all_checks_aes_golden(aes_ctrl):
    report = run_all_checks(aes_ctrl, {"WAIT_KEY"})
    kinds = [v.rule for v in report.violations]
    assert kinds == [Rule.HD_NOT_ONE] * 3 + [Rule.MISSING_DEFAULT]


def test_run_all_checks_clean_design(vending):
    report = run_all_checks(vending)
    assert report.violations == []
    assert ("HD_NOT_ONE", "rule not evaluated: empty protected set") in report.skipped_rules


def test_run_all_checks_deadlock_only(vending_deadlock):
    report = run_all_checks(vending_deadlock)
    assert [v.rule for v in report.violations] == [Rule.STATIC_DEADLOCK]
    assert report.violations[0].states == ("DEADLOCK_STATE",)


def test_run_all_checks_parse_failure(moore_conflict):
    report = run_all_checks(moore_conflict)
    assert not report.parse_ok
    assert report.violations == []
    assert any(d.code == "E_PORT_KIND" for d in report.errors)


def test_reports_are_deterministic(aes_ctrl):
    a = run_all_checks(aes_ctrl, {"WAIT_KEY"}).to_json_text()
    b = run_all_checks(aes_ctrl, {"WAIT_KEY"}).to_json_text()
    assert a == b


def test_report_json_shape(aes_ctrl):
    data = run_all_checks(aes_ctrl, {"WAIT_KEY"}).to_json()
    assert data["schema_version"] == 1
    assert data["protected"] == ["WAIT_KEY"]
    assert len(data["violations"]) == 4


def test_unreachable_truly_isolated_variant():
    text = """module m (input clk, input rst);
parameter A = 2'b00;
parameter B = 2'b01;
parameter GHOST = 2'b10;
reg [1:0] s;
reg [1:0] n;
always @(posedge clk) begin if (rst) s <= A; else s <= n; end
always @(*) begin
case (s)
A: n = B;
B: n = A;
default: n = A;
endcase
end
endmodule"""
    stg = extract_stg(parse_source(SourceText(text)).expect_ast())
    (v,) = detect_unreachable_states(stg)
    assert v.states == ("GHOST",)
    assert v.evidence["variant"] == "with-outgoing"  # default arm gives it an exit

    no_default = text.replace("default: n = A;\n", "")
    stg2 = extract_stg(parse_source(SourceText(no_default)).expect_ast())
    (v2,) = [v for v in detect_unreachable_states(stg2) if v.states == ("GHOST",)]
    assert v2.evidence["variant"] == "isolated"


def test_run_all_checks_undeclared_protected(vending):
    report = run_all_checks(vending, {"NO_SUCH_STATE"})
    assert not report.parse_ok
    assert any(d.code == "E_STG" for d in report.errors)
