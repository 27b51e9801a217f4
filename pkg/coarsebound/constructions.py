import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import structlog

from .chains import (
    CONST,
    Chain,
    GrowthFunction,
    Simplex,
    boundary,
    growth_constant,
    growth_diagnostics,
    propagation,
    pushforward,
)
from .config import get_settings
from .errors import LowerBoundError, PointOutsideBallError, TransferError
from .spaces import (
    BallIndex,
    GroupSpace,
    PointCode,
    Space,
    _require_oracle,
    ball as build_ball,
    direction_from_offset,
    parse_space,
    scan_line,
)

log = structlog.get_logger()

ZLINE = parse_space("zd:1")


def z_line_chain(R: int) -> Chain:
    """Sum over -R <= n < R of (-n)[n, n+1] on zd:1; boundary 1 on -R < n < R."""
    if R < 1:
        raise ValueError(f"window radius must be >= 1, got {R}")
    enc = ZLINE._encode
    return Chain.from_terms(1, (((enc((n,)), enc((n + 1,))), Fraction(-n)) for n in range(-R, R)))


@dataclass
class CosetChain:
    chain: Chain
    core: set[PointCode] = field(default_factory=set)
    windows: dict[PointCode, int] = field(default_factory=dict)


def coset_window(space: GroupSpace, base: PointCode, ball: BallIndex) -> int:
    """Largest w with base·a^n in the ball for every |n| <= w."""
    w = 0
    fwd = bwd = space._decode(base)
    while True:
        fwd, bwd = space._step(fwd, 0), space._step(bwd, 1)
        if space._encode(fwd) not in ball or space._encode(bwd) not in ball:
            return w
        w += 1


def coset_chain(space: Space, R: int, ball: BallIndex | None = None) -> CosetChain:
    """The Z window chain copied onto every axis coset meeting B_R."""
    group = _require_oracle(space)
    ball = ball or build_ball(space, R)
    result = CosetChain(Chain(1))
    terms: list = []
    seen: set[PointCode] = set()
    for p in ball.points:
        if p in seen:
            continue
        base, _ = scan_line(group, p, ball)
        if base in result.windows:
            seen.add(p)
            continue
        w = coset_window(group, base, ball)
        result.windows[base] = w
        coset = {ZLINE._encode((n,)): group.axis_point(base, n) for n in range(-w, w + 1)}
        seen.update(coset.values())
        if w < 1:
            continue
        terms.extend(pushforward(z_line_chain(w), coset, ball).chain.items())
        result.core.update(group.axis_point(base, m) for m in range(-w + 1, w))
    result.chain = Chain.from_terms(1, terms)
    log.debug("coset_chain_built", space=space.spec, radius=R, cosets=len(result.windows))
    return result


def _ray_edges(group: GroupSpace, delta: PointCode, ball: BallIndex):
    """Edges (ray(k+1), ray(k)) of the subray from delta, up to the first exit from the ball."""
    _, m = scan_line(group, delta, ball)
    g = direction_from_offset(group, delta, m)
    t = group._decode(delta)
    prev = delta
    while True:
        t = group._step(t, g)
        q = group._encode(t)
        if q not in ball:
            return
        yield q, prev
        prev = q


def spread_tail(space: Space, delta: PointCode, ball: BallIndex) -> Chain:
    """Unit-weight ray out of delta away from its line's base; boundary [delta] minus the truncation end."""
    group = _require_oracle(space)
    ball.idx(delta)
    return Chain.from_terms(1, (((q, p), Fraction(1)) for q, p in _ray_edges(group, delta, ball)))


@dataclass
class SpreadTailReport:
    chain: Chain
    radius: int
    core_radius: int
    max_linear_ratio: Fraction
    boundary_defects: int
    frontier_defects: int
    bound_violations: int
    propagation: int

    @property
    def ok(self) -> bool:
        return self.boundary_defects == 0 and self.bound_violations == 0 and self.propagation <= 1


def spread_tail_sum(space: Space, ball: BallIndex) -> SpreadTailReport:
    group = _require_oracle(space)
    slack = get_settings().linear_slack
    acc: dict[Simplex, int] = {}
    for delta in ball.points:
        for q, p in _ray_edges(group, delta, ball):
            key, sign = ((q, p), 1) if q < p else ((p, q), -1)
            acc[key] = acc.get(key, 0) + sign
    psi = Chain._normalized(1, {s: Fraction(v) for s, v in acc.items()})

    core_radius = ball.radius // 3
    d = boundary(psi, ball)
    boundary_defects = frontier_defects = 0
    for p, n in zip(ball.points, ball.lengths):
        if d.value(p) != 1:
            if n <= core_radius:
                boundary_defects += 1
            else:
                frontier_defects += 1

    ratio = Fraction(0)
    violations = 0
    for (p, q), v in psi.items():
        n = max(ball.length(p), ball.length(q))
        ratio = max(ratio, abs(v) / (n + 1))
        if abs(v) > 2 * n + slack:
            violations += 1
    report = SpreadTailReport(
        chain=psi,
        radius=ball.radius,
        core_radius=core_radius,
        max_linear_ratio=ratio,
        boundary_defects=boundary_defects,
        frontier_defects=frontier_defects,
        bound_violations=violations,
        propagation=propagation(psi, ball) if psi else 0,
    )
    log.info(
        "spread_tail_sum",
        space=space.spec,
        radius=ball.radius,
        edges=len(psi),
        boundary_defects=boundary_defects,
        max_linear_ratio=float(ratio),
    )
    return report


def _edge_value(rem: dict[Simplex, int], y: PointCode, x: PointCode) -> int:
    """Coefficient of [y, x] in an antisymmetric edge map keyed by sorted pairs."""
    return rem.get((y, x), 0) if y < x else -rem.get((x, y), 0)


def _add_edge(rem: dict[Simplex, int], y: PointCode, x: PointCode, amount: int) -> None:
    key, sign = ((y, x), 1) if y < x else ((x, y), -1)
    rem[key] = rem.get(key, 0) + sign * amount


def _neighborhood_count(ball: BallIndex, i: int, P: int) -> int:
    """#B(x, P) inside the ball."""
    if P <= 1:
        return len(ball.adjacency[i]) + 1
    seen = {i}
    frontier = [i]
    for _ in range(P):
        nxt = []
        for u in frontier:
            for v in ball.adjacency[u]:
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        frontier = nxt
    return len(seen)


@dataclass
class TailDecomposition:
    kappa: Fraction
    multiplicity: int
    rounded: Chain
    tails: dict[PointCode, list[PointCode]] = field(default_factory=dict)
    remainder: Chain = field(default_factory=lambda: Chain(1))

    def tail_chain(self, x: PointCode) -> Chain:
        path = self.tails[x]
        return Chain.from_terms(1, (((path[k + 1], path[k]), 1) for k in range(len(path) - 1)))


def round_and_extract_tails(psi: Chain, C: Fraction, ball: BallIndex) -> TailDecomposition:
    """Scale by kappa = (N+1)/C, round away from zero, then peel one tail per interior point.

    N is the largest #B(x, P) over interior points, P the propagation of psi.
    """
    C = Fraction(C)
    if C <= 0:
        raise ValueError(f"lower bound must be positive, got {C}")
    interior = ball.interior_indices()
    d = boundary(psi, ball) if psi else Chain(0)
    for i in interior:
        p = ball.points[i]
        if d.value(p) < C:
            raise LowerBoundError(
                f"boundary {d.value(p)} < {C} at interior point {ball.space.format_point(p)}", point=p
            )
    P = propagation(psi, ball) if psi else 1
    N = max((_neighborhood_count(ball, i, P) for i in interior), default=0)
    kappa = (N + 1) / C
    rem: dict[Simplex, int] = {}
    for s, v in psi.items():
        scaled = kappa * v
        rem[s] = math.ceil(scaled) if scaled > 0 else math.floor(scaled)
    rounded = Chain._normalized(1, {s: Fraction(v) for s, v in rem.items()})
    result = TailDecomposition(kappa, N, rounded)

    points = ball.points
    incident: dict[int, list[int]] = {}
    for a, b in rem:
        ia, ib = ball.idx(a), ball.idx(b)
        incident.setdefault(ia, []).append(ib)
        incident.setdefault(ib, []).append(ia)
    for nbrs in incident.values():
        nbrs.sort()
    for i in interior:
        x = points[i]
        path = [x]
        u = i
        while True:
            here = points[u]
            best = None
            for v in incident.get(u, ()):
                c = _edge_value(rem, points[v], here)
                if c >= 1 and (best is None or c > best[0]):
                    best = (c, v)
            if best is None:
                raise LowerBoundError(f"tail from {ball.space.format_point(x)} is stuck", point=here)
            v = best[1]
            _add_edge(rem, points[v], here, -1)
            path.append(points[v])
            u = v
            if not ball.interior[u]:
                break
        result.tails[x] = path
    result.remainder = Chain._normalized(1, {s: Fraction(v) for s, v in rem.items()})
    log.debug("tails_extracted", tails=len(result.tails), kappa=str(kappa), multiplicity=N)
    return result


def _escape_path(ball: BallIndex, i: int) -> list[int]:
    """Shortest path from i to the nearest non-interior point, BFS in adjacency order."""
    parent = {i: None}
    queue = deque([i])
    while queue:
        u = queue.popleft()
        if not ball.interior[u]:
            path = [u]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for v in ball.adjacency[u]:
            if v not in parent:
                parent[v] = u
                queue.append(v)
    raise PointOutsideBallError("ball has no frontier to escape to")


def patch_with_tails(psi: Chain, deficits: dict[PointCode, Fraction], ball: BallIndex) -> Chain:
    """Add amount·(path from x to the frontier) for each x; raises the boundary at x only."""
    terms = []
    for x, amount in deficits.items():
        if amount <= 0:
            continue
        path = _escape_path(ball, ball.idx(x))
        terms.extend(((ball.points[path[k + 1]], ball.points[path[k]]), Fraction(amount)) for k in range(len(path) - 1))
    return psi + Chain.from_terms(1, terms)


@dataclass
class TransferReport:
    chain: Chain
    patched: Chain
    target: Fraction
    min_boundary: Fraction
    threshold_radius: int
    inspected: list[PointCode]
    slow_growth_epsilon: float
    growth_constant_psi: Fraction
    growth_constant_phi: Fraction


def transfer_over_f(
    phi: Chain,
    f: GrowthFunction,
    ball: BallIndex,
    target: Fraction = Fraction(1, 2),
    tolerance: Fraction | None = None,
) -> TransferReport:
    """psi(x, y) = phi(x, y)·f(|(x, y)|) from a phi with boundary 1/f(|x|).

    tolerance widens the boundary check for a phi solved against rounded supplies.
    """
    target = Fraction(target)
    tol = max(Fraction(get_settings().transfer_tolerance), Fraction(tolerance or 0))
    d_phi = boundary(phi, ball) if phi else Chain(0)
    for i in ball.interior_indices():
        p = ball.points[i]
        expected = 1 / f.value(ball.lengths[i])
        got = d_phi.value(p)
        if (got != expected) if f.exact and not tolerance else abs(got - expected) > tol:
            raise TransferError(f"boundary {got} != 1/f = {expected} at {ball.space.format_point(p)}")

    psi = phi.map_coefficients(lambda s, v: v * f.value(max(ball.length(p) for p in s)))
    d_psi = boundary(psi, ball) if psi else Chain(0)
    interior = [(ball.points[i], ball.lengths[i]) for i in ball.interior_indices()]
    values = {p: d_psi.value(p) for p, _ in interior}
    threshold = max((n + 1 for p, n in interior if values[p] < target), default=0)
    deficits = {p: target - values[p] for p, _ in interior if values[p] < target}
    report = TransferReport(
        chain=psi,
        patched=patch_with_tails(psi, deficits, ball),
        target=target,
        min_boundary=min(values.values(), default=Fraction(0)),
        threshold_radius=threshold,
        inspected=[p for p, n in interior if n < threshold],
        slow_growth_epsilon=growth_diagnostics(f, max(ball.radius, 1)).slow_growth_epsilon,
        growth_constant_psi=growth_constant(psi, f, ball),
        growth_constant_phi=growth_constant(phi, CONST, ball),
    )
    log.info(
        "transfer_over_f",
        f=f.spec,
        radius=ball.radius,
        min_boundary=float(report.min_boundary),
        threshold_radius=threshold,
        inspected=len(report.inspected),
    )
    return report
