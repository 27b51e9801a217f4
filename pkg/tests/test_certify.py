from dataclasses import replace
from fractions import Fraction

import pytest

from coarsebound import certify
from coarsebound.certify import (
    CutWitness,
    DivergenceProblem,
    FlowCertificate,
    FlowNetwork,
    SupplyKind,
    Verdict,
    build_supply,
    bww_check,
    fundamental_supply,
    min_feasible_K,
    solve,
    summarize_trend,
    transfer_pipeline,
    vanishing_evidence,
    witness_audit,
)
from coarsebound.chains import CONST, LINEAR, Chain, boundary, growth_constant, parse_growth
from coarsebound.constructions import transfer_over_f
from coarsebound.errors import AuditError, FlowOverflowError, TransferError
from coarsebound.spaces import ball, parse_space


def test_flow_network_small():
    net = FlowNetwork(4)
    s, a, b, t = range(4)
    net.add_edge(s, a, 3)
    net.add_edge(s, b, 2)
    net.add_edge(a, b, 1)
    net.add_edge(a, t, 2)
    net.add_edge(b, t, 3)
    assert net.max_flow(s, t) == 5


def _assert_certificate(outcome: FlowCertificate, problem: DivergenceProblem):
    b = problem.ball
    d = boundary(outcome.chain, b) if outcome.chain else Chain(0)
    for i in b.interior_indices():
        p = b.points[i]
        assert d.value(p) == problem.supply.get(p, 0)
    assert outcome.slack >= 0
    for (p, q), v in outcome.chain.items():
        assert abs(v) <= problem.capacity(b.idx(p), b.idx(q))


@pytest.mark.parametrize("R", range(3, 9))
def test_lattice_line_constant(z1, R):
    res = min_feasible_K(z1, R)
    assert float(res.K) == pytest.approx(R - 0.5, abs=1e-3)
    assert res.lo <= R - Fraction(1, 2) <= res.hi


@pytest.mark.parametrize("R", range(2, 5))
def test_free_group_constant(free2, R):
    res = min_feasible_K(free2, R)
    expected = (2 * 3 ** (R - 1) - 1) / (4 * 3 ** (R - 1))
    assert float(res.K) == pytest.approx(expected, abs=1e-3)


def test_lattice_line_linear(z1):
    res = min_feasible_K(z1, 5, g=LINEAR)
    assert float(res.K) == pytest.approx(0.75, abs=1e-3)
    b = ball(z1, 5)
    outcome = solve(DivergenceProblem(b, fundamental_supply(b), Fraction(7, 10), LINEAR))
    assert isinstance(outcome, CutWitness)
    assert witness_audit(outcome).strict


def test_witness_is_whole_interior(z1):
    b = ball(z1, 5)
    w = solve(DivergenceProblem(b, fundamental_supply(b), Fraction(4)))
    assert isinstance(w, CutWitness)
    assert len(w.points) == 9
    assert w.sign == 1
    assert w.edge_capacity_sum == 2
    assert w.violation == 1
    audit = witness_audit(w)
    assert audit.vertex_ratio == Fraction(9, 4)
    assert audit.conversion_factor == 2


def test_tampered_witness_fails_audit(z1):
    b = ball(z1, 5)
    w = solve(DivergenceProblem(b, fundamental_supply(b), Fraction(4)))
    with pytest.raises(AuditError):
        witness_audit(replace(w, supply_sum=w.supply_sum + 1))
    with pytest.raises(AuditError):
        witness_audit(w, space=parse_space("zd:2"))


def test_feasible_certificate_is_exact(z2):
    b = ball(z2, 3)
    problem = DivergenceProblem(b, fundamental_supply(b), Fraction(10))
    outcome = solve(problem)
    assert isinstance(outcome, FlowCertificate)
    _assert_certificate(outcome, problem)


def test_reciprocal_supply_is_exact(z2):
    b = ball(z2, 3)
    problem = DivergenceProblem(b, build_supply(b, SupplyKind.RECIPROCAL, LINEAR), Fraction(10))
    outcome = solve(problem)
    assert isinstance(outcome, FlowCertificate)
    assert not outcome.supply_rounded
    assert outcome.scale % 6 == 0
    _assert_certificate(outcome, problem)
    d = boundary(outcome.chain, b)
    assert d.value(z2.parse_point("1,1")) == Fraction(1, 3)


@pytest.mark.parametrize("spec", ["zd:1", "zd:2", "free:2", "heis", "lamp:1", "bs:1:2"])
@pytest.mark.parametrize("g", ["const", "linear", "power:1/2"])
def test_duality_soundness(spec, g):
    space = parse_space(spec)
    b = ball(space, 3)
    problem = DivergenceProblem(b, fundamental_supply(b), Fraction(1, 2), parse_growth(g))
    outcome = solve(problem)
    if outcome.feasible:
        _assert_certificate(outcome, problem)
    else:
        report = witness_audit(outcome)
        assert report.strict
        assert outcome.sign * outcome.supply_sum > outcome.K * outcome.edge_capacity_sum


def test_bww_two_sided(z2):
    b = ball(z2, 4)
    p, q = z2.parse_point("0,0"), z2.parse_point("1,0")
    dipole = Chain.zero_chain({p: 1, q: -1})
    assert bww_check(z2, dipole, 4, Fraction(1), b).feasible
    w = bww_check(z2, dipole, 4, Fraction(1, 8), b)
    assert isinstance(w, CutWitness)
    assert witness_audit(w).strict
    assert w.sign in (1, -1)


def test_bww_needs_zero_chain(z2):
    edge = Chain.from_terms(1, [((z2.parse_point("0,0"), z2.parse_point("1,0")), 1)])
    with pytest.raises(ValueError):
        bww_check(z2, edge, 3, Fraction(1))


def test_overflow_is_reported(z2):
    b = ball(z2, 2)
    with pytest.raises(FlowOverflowError):
        solve(DivergenceProblem(b, fundamental_supply(b), Fraction(2**40), CONST, scale=2**30))


def test_rel_tol_floor(z1):
    with pytest.raises(ValueError):
        min_feasible_K(z1, 3, rel_tol=1e-6)


def test_summarize_trend():
    assert summarize_trend([(R, Fraction(1, 2)) for R in range(1, 6)]).verdict == Verdict.EXACT
    growing = [(R, Fraction(2 * R - 1, 2)) for R in range(1, 9)]
    assert summarize_trend(growing).verdict == Verdict.GROWING
    bounded = [(R, Fraction(2 * 3 ** (R - 1) - 1, 4 * 3 ** (R - 1))) for R in range(1, 7)]
    assert summarize_trend(bounded).verdict == Verdict.BOUNDED


@pytest.mark.parametrize(
    "spec, f, R_max, verdict",
    [
        ("zd:1", "const", 6, Verdict.GROWING),
        ("zd:2", "const", 5, Verdict.GROWING),
        ("free:2", "const", 4, Verdict.BOUNDED),
        ("zd:2", "linear", 5, Verdict.BOUNDED),
    ],
)
def test_vanishing_verdicts(spec, f, R_max, verdict):
    ev = vanishing_evidence(parse_space(spec), parse_growth(f), R_max)
    assert ev.verdict == verdict
    ks = [k for _, k in ev.table]
    assert all(b >= a * (1 - Fraction(1, 1000)) for a, b in zip(ks, ks[1:]))


def test_monotone_on_amenable_groups():
    for spec in ("heis", "lamp:1"):
        ev = vanishing_evidence(parse_space(spec), CONST, 3)
        ks = [k for _, k in ev.table]
        assert all(b >= a * (1 - Fraction(1, 1000)) for a, b in zip(ks, ks[1:]))


def test_transfer_pipeline(z2):
    report = transfer_pipeline(z2, LINEAR, 4)
    t = report.transfer
    b = ball(z2, 4)
    assert t.growth_constant_psi == t.growth_constant_phi
    assert growth_constant(t.chain, LINEAR, b) <= growth_constant(report.phi.chain, CONST, b)
    d = boundary(t.chain, b)
    inspected = set(t.inspected)
    for i in b.interior_indices():
        p = b.points[i]
        if p not in inspected:
            assert d.value(p) >= Fraction(1, 2)
    assert len(report.tails.tails) == len(b.interior_indices())


def test_tight_cut_with_coprime_denominator_is_feasible(free2):
    b = ball(free2, 4)
    problem = DivergenceProblem(b, fundamental_supply(b), Fraction(53, 108))
    outcome = solve(problem)
    assert isinstance(outcome, FlowCertificate)
    assert outcome.slack == 0
    assert outcome.scale % 27 == 0
    _assert_certificate(outcome, problem)
    below = solve(DivergenceProblem(b, fundamental_supply(b), Fraction(52, 108)))
    assert isinstance(below, CutWitness)
    assert witness_audit(below).strict


def test_single_interior_point_at_one_third():
    lamp = parse_space("lamp:1")
    b = ball(lamp, 1)
    assert len(b.interior_indices()) == 1
    outcome = solve(DivergenceProblem(b, fundamental_supply(b), Fraction(1, 3)))
    assert isinstance(outcome, FlowCertificate)
    assert outcome.slack == 0
    w = solve(DivergenceProblem(b, fundamental_supply(b), Fraction(1, 3) - Fraction(1, 10**7)))
    assert isinstance(w, CutWitness)
    assert w.points == [lamp.basepoint]


def test_doubling_keeps_last_real_witness(monkeypatch, z1):
    real = certify._try_K

    def flaky(b, supply, K, g, scale):
        if K == 4:
            return None
        return real(b, supply, K, g, scale)

    monkeypatch.setattr(certify, "_try_K", flaky)
    res = min_feasible_K(z1, 5, rel_tol=0.9)
    assert (res.lo, res.hi) == (4, 8)
    assert res.witness is not None
    assert res.witness.K == 2
    assert witness_audit(res.witness).strict


@pytest.mark.parametrize("f", ["power:1/2", "log"])
def test_transfer_pipeline_with_rounded_supplies(z2, f):
    R = 3
    report = transfer_pipeline(z2, parse_growth(f), R)
    assert report.phi.supply_rounded
    b = ball(z2, R)
    assert len(report.tails.tails) == len(b.interior_indices())
    d = boundary(report.tails.rounded, b)
    assert all(d.value(b.points[i]) >= 1 for i in b.interior_indices())


def test_transfer_pipeline_rounds_to_integer_chain(z2):
    report = transfer_pipeline(z2, LINEAR, 4)
    b = ball(z2, 4)
    td = report.tails
    assert all(v.denominator == 1 for _, v in td.rounded.items())
    d = boundary(td.rounded, b)
    assert all(d.value(b.points[i]) >= 1 for i in b.interior_indices())


def test_transfer_rejects_wrong_boundary(z2):
    b = ball(z2, 3)
    with pytest.raises(TransferError):
        transfer_over_f(Chain(1), LINEAR, b)


@pytest.mark.parametrize("spec", ["zd:2", "heis"])
@pytest.mark.parametrize("R", [2, 3])
def test_restriction_keeps_feasibility(spec, R):
    space = parse_space(spec)
    outer = ball(space, R + 1)
    K = min_feasible_K(space, R + 1, ball=outer).hi
    cert = solve(DivergenceProblem(outer, fundamental_supply(outer), K))
    assert isinstance(cert, FlowCertificate)
    inner = ball(space, R)
    restricted = Chain.from_terms(1, ((s, v) for s, v in cert.chain.items() if all(p in inner for p in s)))
    d = boundary(restricted, inner) if restricted else Chain(0)
    for i in inner.interior_indices():
        assert d.value(inner.points[i]) == 1
    assert all(abs(v) <= K for _, v in restricted.items())
    assert min_feasible_K(space, R, ball=inner).K <= K * (1 + Fraction(1, 1000))


def test_flow_value_matches_cut_capacity(z1):
    b = ball(z1, 5)
    w = solve(DivergenceProblem(b, fundamental_supply(b), Fraction(4)))
    assert w.flow_value == w.cut_capacity == w.K * w.edge_capacity_sum * w.scale
    assert w.cut_capacity == 8 * w.scale


@pytest.mark.slow
@pytest.mark.parametrize("R", [5, 6])
def test_free_group_constant_large_radius(free2, R):
    res = min_feasible_K(free2, R)
    expected = (2 * 3 ** (R - 1) - 1) / (4 * 3 ** (R - 1))
    assert float(res.K) == pytest.approx(expected, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("spec", ["zd:2", "heis", "lamp:1", "free:2", "bs:1:2"])
@pytest.mark.parametrize("g", ["const", "linear", "power:1/2"])
def test_duality_full_matrix(spec, g):
    space = parse_space(spec)
    growth = parse_growth(g)
    for R in range(1, 7):
        b = ball(space, R)
        for K in (Fraction(1, 2), Fraction(2)):
            problem = DivergenceProblem(b, fundamental_supply(b), K, growth)
            outcome = solve(problem)
            if outcome.feasible:
                _assert_certificate(outcome, problem)
            else:
                assert witness_audit(outcome).strict


@pytest.mark.slow
@pytest.mark.parametrize(
    "spec, f, verdict",
    [
        ("heis", "linear", Verdict.BOUNDED),
        ("bs:1:2", "linear", Verdict.BOUNDED),
        ("lamp:1", "const", Verdict.GROWING),
    ],
)
def test_vanishing_verdicts_large_radius(spec, f, verdict):
    ev = vanishing_evidence(parse_space(spec), parse_growth(f), 6)
    assert ev.verdict == verdict


@pytest.mark.slow
def test_wreath_product_power_growth_flattens():
    lamp2 = parse_space("lamp:2")
    power = vanishing_evidence(lamp2, parse_growth("power:1/2"), 4, R_min=2)
    const = vanishing_evidence(lamp2, CONST, 4, R_min=2)
    tol = Fraction(1, 1000)
    kp = [k for _, k in power.table]
    kc = [k for _, k in const.table]
    assert all(b >= a * (1 - tol) for a, b in zip(kp, kp[1:]))
    for (a, b), (c, d) in zip(zip(kp, kp[1:]), zip(kc, kc[1:])):
        assert b - a <= (d - c) + tol * d
