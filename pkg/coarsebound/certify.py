import math
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
import structlog

from . import metrics
from .chains import CONST, Chain, GrowthFunction, parse_growth
from .config import get_settings
from .constructions import TailDecomposition, TransferReport, round_and_extract_tails, transfer_over_f
from .errors import (
    AuditError,
    FlowOverflowError,
    MonotonicityError,
    ScaleResolutionError,
    SearchDivergenceError,
)
from .profiles import vertex_boundary
from .spaces import BallIndex, PointCode, Space, ball as build_ball, parse_space

log = structlog.get_logger()

INF = 2**62


class FlowNetwork:
    """Residual graph with paired arcs e and e ^ 1; level-graph blocking flows."""

    def __init__(self, n: int):
        self.n = n
        self.head: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_edge(self, u: int, v: int, c: int, rc: int = 0) -> int:
        if max(c, rc) > INF:
            raise FlowOverflowError(f"capacity {max(c, rc)} does not fit 64-bit; lower the scale or radius")
        e = len(self.to)
        self.to.extend((v, u))
        self.cap.extend((c, rc))
        self.head[u].append(e)
        self.head[v].append(e + 1)
        return e

    def _levels(self, s: int, t: int) -> list[int] | None:
        level = [-1] * self.n
        level[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for e in self.head[u]:
                v = self.to[e]
                if self.cap[e] > 0 and level[v] < 0:
                    level[v] = level[u] + 1
                    queue.append(v)
        return level if level[t] >= 0 else None

    def _augment(self, s: int, t: int, level: list[int], it: list[int]) -> int:
        stack = [s]
        path: list[int] = []
        while stack:
            u = stack[-1]
            if u == t:
                pushed = min(self.cap[e] for e in path)
                for e in path:
                    self.cap[e] -= pushed
                    self.cap[e ^ 1] += pushed
                return pushed
            edges = self.head[u]
            while it[u] < len(edges):
                e = edges[it[u]]
                v = self.to[e]
                if self.cap[e] > 0 and level[v] == level[u] + 1:
                    stack.append(v)
                    path.append(e)
                    break
                it[u] += 1
            else:
                # dead end: prune it from the level graph
                level[u] = -1
                stack.pop()
                if path:
                    path.pop()
                if stack:
                    it[stack[-1]] += 1
        return 0

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        while (level := self._levels(s, t)) is not None:
            it = [0] * self.n
            while pushed := self._augment(s, t, level, it):
                flow += pushed
        return flow

    def reachable(self, s: int) -> list[bool]:
        seen = [False] * self.n
        seen[s] = True
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for e in self.head[u]:
                v = self.to[e]
                if self.cap[e] > 0 and not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return seen


class SupplyKind(str, Enum):
    ONE = "one"
    RECIPROCAL = "reciprocal"


def fundamental_supply(ball: BallIndex) -> dict[PointCode, Fraction]:
    return {ball.points[i]: Fraction(1) for i in ball.interior_indices()}


def reciprocal_supply(ball: BallIndex, f: GrowthFunction) -> dict[PointCode, Fraction]:
    return {ball.points[i]: 1 / f.value(ball.lengths[i]) for i in ball.interior_indices()}


def chain_supply(ball: BallIndex, c: Chain) -> dict[PointCode, Fraction]:
    """Restriction of a 0-chain to the interior; frontier points stay unconstrained."""
    for p in c.support():
        ball.idx(p)
    return {p: c.value(p) for p in (ball.points[i] for i in ball.interior_indices()) if c.value(p)}


def build_supply(ball: BallIndex, kind: SupplyKind, f: GrowthFunction | None = None) -> dict[PointCode, Fraction]:
    if kind == SupplyKind.RECIPROCAL:
        return reciprocal_supply(ball, f or CONST)
    return fundamental_supply(ball)


@dataclass
class DivergenceProblem:
    ball: BallIndex
    supply: dict[PointCode, Fraction]
    K: Fraction
    g: GrowthFunction = CONST
    scale: int | None = None

    def capacity(self, i: int, j: int) -> Fraction:
        return self.K * self.g.value(self.ball.edge_length(i, j))


@dataclass
class FlowCertificate:
    chain: Chain
    slack: Fraction
    K_used: Fraction
    flow_value: int
    scale: int
    supply_rounded: bool = False
    feasible: bool = True


@dataclass
class CutWitness:
    points: list[PointCode]
    supply_sum: Fraction
    edge_capacity_sum: Fraction
    vertex_form_sum: Fraction
    K: Fraction
    sign: int = 1
    flow_value: int = 0
    cut_capacity: int = 0
    scale: int = 0
    problem: DivergenceProblem | None = field(default=None, repr=False, compare=False)
    feasible: bool = False

    @property
    def violation(self) -> Fraction:
        return self.sign * self.supply_sum - self.K * self.edge_capacity_sum


def _effective_scale(problem: DivergenceProblem) -> tuple[int, bool]:
    """lcm of the base scale, supply denominators and capacity denominators.

    Supplies that push the lcm past max_scale fall back to the base scale with rounding.
    Capacity denominators past max_scale are left to floor rounding and the retry loop.
    """
    settings = get_settings()
    S = problem.scale or settings.flow_scale
    effective, rounded = S, False
    for v in problem.supply.values():
        effective = math.lcm(effective, v.denominator)
        if effective > settings.max_scale:
            effective, rounded = S, True
            break
    for t in range(problem.ball.radius + 1):
        widened = math.lcm(effective, (problem.K * problem.g.value(t)).denominator)
        if widened <= settings.max_scale:
            effective = widened
    return effective, rounded


def _scaled_supply(v: Fraction, S: int) -> int:
    return math.floor(v * S + Fraction(1, 2))


def _edge_sums(problem: DivergenceProblem, members: set[int]) -> tuple[Fraction, list[tuple[int, int]]]:
    ball = problem.ball
    crossing = [(i, j) for i in sorted(members) for j in ball.adjacency[i] if j not in members]
    return sum((problem.g.value(ball.edge_length(i, j)) for i, j in crossing), Fraction(0)), crossing


def _solve_at_scale(problem: DivergenceProblem, S: int, rounded: bool) -> FlowCertificate | CutWitness:
    ball = problem.ball
    n = len(ball)
    source, sink, hub = n, n + 1, n + 2
    net = FlowNetwork(n + 3)
    scaled = {}
    for p, v in problem.supply.items():
        i = ball.idx(p)
        sigma = _scaled_supply(v, S) if rounded else int(v * S)
        scaled[i] = sigma
        if sigma > 0:
            net.add_edge(source, i, sigma)
        elif sigma < 0:
            net.add_edge(i, sink, -sigma)
    edge_ids = []
    for i, j in ball.edges():
        c = math.floor(S * problem.capacity(i, j))
        edge_ids.append((i, j, c, net.add_edge(i, j, c, c)))
    for i in range(n):
        if not ball.interior[i]:
            net.add_edge(i, hub, INF, INF)
    total = sum(scaled.values())
    if total > 0:
        net.add_edge(hub, sink, total)
    elif total < 0:
        net.add_edge(source, hub, -total)
    demand = sum(s for s in scaled.values() if s > 0) + max(0, -total)

    flow = net.max_flow(source, sink)
    if flow == demand:
        terms = []
        slack = None
        for i, j, c, e in edge_ids:
            moved = c - net.cap[e]
            if moved:
                # flow i -> j carries the chain coefficient on [j, i]
                terms.append(((ball.points[j], ball.points[i]), Fraction(moved, S)))
            room = problem.capacity(i, j) - abs(Fraction(moved, S))
            slack = room if slack is None else min(slack, room)
        return FlowCertificate(
            chain=Chain.from_terms(1, terms),
            slack=slack if slack is not None else Fraction(0),
            K_used=problem.K,
            flow_value=flow,
            scale=S,
            supply_rounded=rounded,
        )

    seen = net.reachable(source)
    interior = ball.interior_indices()
    if not seen[hub]:
        members, sign = {i for i in interior if seen[i]}, 1
    else:
        members, sign = {i for i in interior if not seen[i]}, -1
    edge_sum, _ = _edge_sums(problem, members)
    points = [ball.points[i] for i in sorted(members)]
    vertex_sum = sum((problem.g.value(ball.length(p)) for p in vertex_boundary(set(points), ball)), Fraction(0))
    return CutWitness(
        points=points,
        supply_sum=sum((problem.supply.get(p, Fraction(0)) for p in points), Fraction(0)),
        edge_capacity_sum=edge_sum,
        vertex_form_sum=vertex_sum,
        K=problem.K,
        sign=sign,
        flow_value=flow,
        cut_capacity=flow,
        scale=S,
        problem=problem,
    )


def solve(problem: DivergenceProblem) -> FlowCertificate | CutWitness:
    """Max-flow on the truncation: a controlled chain, or a finite set violating the cut condition."""
    settings = get_settings()
    S, rounded = _effective_scale(problem)
    started = time.perf_counter()
    for attempt in range(settings.scale_retries + 1):
        outcome = _solve_at_scale(problem, S, rounded)
        if isinstance(outcome, FlowCertificate) or outcome.violation > 0:
            metrics.record_solve("feasible" if outcome.feasible else "witness", time.perf_counter() - started)
            return outcome
        log.warning("witness_unresolved", scale=S, attempt=attempt, K=str(problem.K), size=len(outcome.points))
        S *= 16
    metrics.record_solve("unresolved", time.perf_counter() - started)
    raise ScaleResolutionError(f"min cut at K={problem.K} is a rounding artifact up to scale {S // 16}")


@dataclass
class KSearchResult:
    R: int
    K: Fraction
    lo: Fraction
    hi: Fraction
    certificate: FlowCertificate | None = None
    witness: CutWitness | None = None
    solves: int = 0


def _try_K(ball, supply, K, g, scale) -> FlowCertificate | CutWitness | None:
    try:
        return solve(DivergenceProblem(ball, supply, K, g, scale))
    except ScaleResolutionError as e:
        log.warning("solve_unresolved", K=str(K), error=str(e))
        return None


def min_feasible_K(
    space: Space,
    R: int,
    supply_kind: SupplyKind = SupplyKind.ONE,
    g: GrowthFunction = CONST,
    rel_tol: float | None = None,
    f: GrowthFunction | None = None,
    scale: int | None = None,
    ball: BallIndex | None = None,
) -> KSearchResult:
    """Doubling bracket from K = 1, then bisection to relative width rel_tol."""
    settings = get_settings()
    rel_tol = Fraction(str(rel_tol if rel_tol is not None else settings.rel_tol))
    if rel_tol < Fraction(1, 10**4):
        raise ValueError(f"rel_tol must be >= 1e-4, got {float(rel_tol)}")
    ball = ball or build_ball(space, R)
    supply = build_supply(ball, supply_kind, f)
    result = KSearchResult(R, Fraction(0), Fraction(0), Fraction(0))
    if not any(supply.values()):
        result.certificate = solve(DivergenceProblem(ball, supply, Fraction(0), g, scale))
        return result

    K = Fraction(1)
    outcome = _try_K(ball, supply, K, g, scale)
    feasible = isinstance(outcome, FlowCertificate)
    lo = hi = None
    for _ in range(settings.max_doublings):
        result.solves += 1
        if feasible:
            hi, result.certificate = K, outcome
            if lo is not None:
                break
            K /= 2
        else:
            lo = K
            if outcome is not None:
                result.witness = outcome
            if hi is not None:
                break
            K *= 2
        outcome = _try_K(ball, supply, K, g, scale)
        feasible = isinstance(outcome, FlowCertificate)
    else:
        if hi is None:
            raise SearchDivergenceError(f"no feasible K up to 2^{settings.max_doublings} at R={R}")
        return result

    while hi - lo > rel_tol * hi:
        mid = (lo + hi) / 2
        outcome = _try_K(ball, supply, mid, g, scale)
        result.solves += 1
        if isinstance(outcome, FlowCertificate):
            hi, result.certificate = mid, outcome
        else:
            lo = mid
            if outcome is not None:
                result.witness = outcome
    result.lo, result.hi, result.K = lo, hi, (lo + hi) / 2
    log.info("min_feasible_K", space=space.spec, radius=R, K=float(result.K), solves=result.solves)
    return result


def k_cell(space_spec: str, R: int, supply_kind: str, g_spec: str, f_spec: str | None, rel_tol: float, scale: int | None):
    """Picklable sweep cell: (R, K_R as a string)."""
    f = parse_growth(f_spec) if f_spec else None
    res = min_feasible_K(parse_space(space_spec), R, SupplyKind(supply_kind), parse_growth(g_spec), rel_tol, f, scale)
    return R, str(res.K)


class Verdict(str, Enum):
    BOUNDED = "bounded-trend"
    GROWING = "growing-trend"
    EXACT = "exact"


@dataclass
class TrendSummary:
    verdict: Verdict
    slope: float


def summarize_trend(table: list[tuple[int, Fraction]]) -> TrendSummary:
    """Log-log slope of K_R over the upper half of the radii."""
    values = [k for _, k in table]
    if len(set(values)) <= 1:
        return TrendSummary(Verdict.EXACT, 0.0)
    upper = [(r, k) for r, k in table if k > 0][len(table) // 2:]
    if len(upper) < 2:
        upper = [(r, k) for r, k in table if k > 0][-2:]
    x = np.log([float(r) for r, _ in upper])
    y = np.log([float(k) for _, k in upper])
    slope = float(np.polyfit(x, y, 1)[0])
    verdict = Verdict.GROWING if slope >= get_settings().trend_exponent else Verdict.BOUNDED
    return TrendSummary(verdict, slope)


@dataclass
class VanishingEvidence:
    space: str
    f: str
    table: list[tuple[int, Fraction]]
    verdict: Verdict
    slope: float


def vanishing_evidence(
    space: Space,
    f: GrowthFunction,
    R_max: int,
    rel_tol: float | None = None,
    R_min: int = 1,
    jobs: int = 1,
    scale: int | None = None,
) -> VanishingEvidence:
    """Table of (R, K_R) for the fundamental class with capacities K·f, plus the trend verdict."""
    settings = get_settings()
    rel_tol = rel_tol if rel_tol is not None else settings.rel_tol
    radii = list(range(max(1, R_min), R_max + 1))
    if jobs > 1:
        from .sweeps import run_sweep_sync

        cells = {R: (space.spec, R, SupplyKind.ONE.value, f.spec, None, rel_tol, scale) for R in radii}
        table = [(R, Fraction(k)) for R, (_, k) in sorted(run_sweep_sync(k_cell, cells, jobs).items())]
    else:
        table = [(R, min_feasible_K(space, R, SupplyKind.ONE, f, rel_tol, scale=scale).K) for R in radii]
    for (r0, k0), (r1, k1) in zip(table, table[1:]):
        if k1 < k0 - 2 * Fraction(rel_tol) * max(k0, k1):
            raise MonotonicityError(f"K_{r1} = {float(k1)} < K_{r0} = {float(k0)}")
    trend = summarize_trend(table)
    log.info("vanishing_evidence", space=space.spec, f=f.spec, verdict=trend.verdict.value, slope=trend.slope)
    return VanishingEvidence(space.spec, f.spec, table, trend.verdict, trend.slope)


def bww_check(
    space: Space, c: Chain, R: int, K: Fraction, ball: BallIndex | None = None, scale: int | None = None
) -> FlowCertificate | CutWitness:
    """Two-sided supplies from a 0-chain, unit capacities scaled by K."""
    if c.dimension != 0:
        raise ValueError("bww_check needs a 0-chain")
    ball = ball or build_ball(space, R)
    return solve(DivergenceProblem(ball, chain_supply(ball, c), Fraction(K), CONST, scale))


@dataclass
class AuditReport:
    size: int
    sign: int
    supply_sum: Fraction
    edge_capacity_sum: Fraction
    vertex_form_sum: Fraction
    vertex_ratio: Fraction
    K: Fraction
    conversion_factor: int
    strict: bool = True


def witness_audit(w: CutWitness, f: GrowthFunction | None = None, space: Space | None = None) -> AuditReport:
    """Recompute the witness sums from scratch and confirm the strict violation."""
    if w.problem is None:
        raise AuditError("witness carries no problem to audit against")
    problem = w.problem
    ball = problem.ball
    if space is not None and space.spec != ball.space.spec:
        raise AuditError(f"witness is for {ball.space.spec}, not {space.spec}")
    f = f or problem.g
    members = set()
    for p in w.points:
        i = ball.idx(p)
        if not ball.interior[i]:
            raise AuditError(f"witness point {ball.space.format_point(p)} is not interior")
        members.add(i)
    supply_sum = sum((problem.supply.get(p, Fraction(0)) for p in w.points), Fraction(0))
    edge_sum, _ = _edge_sums(problem, members)
    if supply_sum != w.supply_sum or edge_sum != w.edge_capacity_sum:
        raise AuditError("recomputed witness sums disagree with the solver's")
    if not w.sign * supply_sum > w.K * edge_sum:
        raise AuditError(f"no strict violation: {w.sign}·{supply_sum} <= {w.K}·{edge_sum}")
    outer = vertex_boundary(set(w.points), ball)
    vertex_sum = sum((f.value(ball.length(p)) for p in outer), Fraction(0))
    return AuditReport(
        size=len(w.points),
        sign=w.sign,
        supply_sum=supply_sum,
        edge_capacity_sum=edge_sum,
        vertex_form_sum=vertex_sum,
        vertex_ratio=Fraction(len(w.points)) / vertex_sum if vertex_sum else Fraction(0),
        K=w.K,
        conversion_factor=ball.max_degree(),
    )


@dataclass
class TransferPipelineReport:
    K: Fraction
    phi: FlowCertificate
    transfer: TransferReport
    tails: TailDecomposition


def transfer_pipeline(
    space: Space, f: GrowthFunction, R: int, target: Fraction = Fraction(1, 2), rel_tol: float | None = None
) -> TransferPipelineReport:
    """Flow with supplies 1/f and unit capacities, lift by f, patch, then round to an integer chain."""
    ball = build_ball(space, R)
    search = min_feasible_K(space, R, SupplyKind.RECIPROCAL, CONST, rel_tol, f=f, ball=ball)
    cert = search.certificate
    # rounded supplies are off by at most 1/(2S) per point
    tolerance = Fraction(1, cert.scale) if cert.supply_rounded else None
    report = transfer_over_f(cert.chain, f, ball, target, tolerance)
    tails = round_and_extract_tails(report.patched, target, ball)
    return TransferPipelineReport(search.hi, search.certificate, report, tails)
