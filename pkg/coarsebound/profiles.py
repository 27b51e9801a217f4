from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import combinations

import numpy as np
import structlog

from .chains import GrowthFunction
from .config import get_settings
from .errors import NeighborhoodEscapeError, SubsetScanCapError
from .spaces import BallIndex, PointCode, Space, ball as build_ball, parse_space

log = structlog.get_logger()


def _member_indices(A, ball: BallIndex) -> set[int]:
    members = set()
    for p in A:
        i = ball.idx(p)
        if not ball.interior[i]:
            raise NeighborhoodEscapeError(
                f"neighborhood of {ball.space.format_point(p)} leaves the ball of radius {ball.radius}"
            )
        members.add(i)
    return members


def vertex_boundary(A, ball: BallIndex) -> set[PointCode]:
    """Inner boundary (points of A with a neighbor outside A) plus outer boundary."""
    members = _member_indices(A, ball)
    out = set()
    for i in members:
        for j in ball.adjacency[i]:
            if j not in members:
                out.add(ball.points[i])
                out.add(ball.points[j])
    return out


def edge_boundary(A, ball: BallIndex) -> list[tuple[PointCode, PointCode]]:
    members = _member_indices(A, ball)
    edges = set()
    for i in members:
        for j in ball.adjacency[i]:
            if j not in members:
                p, q = ball.points[i], ball.points[j]
                edges.add((p, q) if p < q else (q, p))
    return sorted(edges)


def ball_around(space: Space, points) -> BallIndex:
    """Smallest ball whose interior holds every point."""
    points = set(points)
    R = 0
    while True:
        b = build_ball(space, R)
        if points <= set(b.points):
            return build_ball(space, R + 1)
        R += 1


def iso_ratio(space: Space, A, f: GrowthFunction, ball: BallIndex | None = None) -> Fraction:
    """#A / sum of f(|x|) over the vertex boundary of A."""
    A = set(A)
    if not A:
        return Fraction(0)
    ball = ball or ball_around(space, A)
    total = sum((f.value(ball.length(p)) for p in vertex_boundary(A, ball)), Fraction(0))
    return Fraction(len(A)) / total


class ProfileMode(str, Enum):
    EXACT = "exact"
    CANDIDATES = "candidates"


@dataclass
class ProfilePoint:
    r: int
    value: Fraction
    witness_set: list[PointCode]
    exact: bool
    family: str = "subsets"
    # sets are centered at the basepoint; only a group makes that lossless
    centered: bool = True
    homogeneous: bool = True


class _Accretion:
    """Incremental inner/outer boundary counts of a growing set."""

    def __init__(self, ball: BallIndex):
        self.ball = ball
        self.members: set[int] = set()
        self.outside = {}  # member -> neighbors outside the set
        self.touching = {}  # non-member -> neighbors inside the set
        self.inner = 0

    @property
    def boundary(self) -> int:
        return self.inner + len(self.touching)

    def delta(self, i: int) -> int:
        adj = self.ball.adjacency[i]
        d = -1 if i in self.touching else 0
        d += sum(1 for j in adj if j not in self.members and j not in self.touching)
        if any(j not in self.members for j in adj):
            d += 1
        d -= sum(1 for j in adj if j in self.members and self.outside[j] == 1)
        return d

    def add(self, i: int) -> None:
        adj = self.ball.adjacency[i]
        self.touching.pop(i, None)
        self.members.add(i)
        self.outside[i] = sum(1 for j in adj if j not in self.members)
        if self.outside[i]:
            self.inner += 1
        for j in adj:
            if j in self.members and j != i:
                self.outside[j] -= 1
                if self.outside[j] == 0:
                    self.inner -= 1
            elif j not in self.members:
                self.touching[j] = self.touching.get(j, 0) + 1


def _best(candidates, current):
    best = current
    for ratio, family, pts in candidates:
        if best is None or ratio > best[0]:
            best = (ratio, family, pts)
    return best


def _greedy(ball: BallIndex, limit: int):
    acc = _Accretion(ball)
    acc.add(0)
    best = (Fraction(1, acc.boundary), [0])
    order = []
    while True:
        options = [j for j in acc.touching if j < limit]
        if not options:
            break
        j = min(options, key=lambda j: (acc.delta(j), j))
        acc.add(j)
        order.append(j)
        ratio = Fraction(len(acc.members), acc.boundary)
        if ratio > best[0]:
            best = (ratio, [0, *order])
    return best


def _boundary_size(members: set[int], ball: BallIndex) -> int:
    inner = 0
    seen_outer = set()
    for i in members:
        escape = False
        for j in ball.adjacency[i]:
            if j not in members:
                escape = True
                seen_outer.add(j)
        inner += escape
    return inner + len(seen_outer)


def isodiametric_profile(space: Space, r: int, mode: ProfileMode = ProfileMode.CANDIDATES) -> ProfilePoint:
    """sup #F / #dF over F inside B(e, r), exactly or over candidate families."""
    ball = build_ball(space, r + 1)
    m = sum(1 for n in ball.lengths if n <= r)
    homogeneous = space.capabilities.is_group

    if mode == ProfileMode.EXACT:
        cap = get_settings().subset_scan_cap
        if m > cap:
            raise SubsetScanCapError(f"B(e,{r}) has {m} points, exact scan cap is {cap}")
        nbr = [sum(1 << j for j in ball.adjacency[i]) for i in range(m)]
        best_ratio, best_set = Fraction(0), None
        for k in range(1, m + 1):
            if best_set is not None and k <= best_ratio:
                continue
            for comb in combinations(range(m), k):
                mask = 0
                for i in comb:
                    mask |= 1 << i
                reach = 0
                inner = 0
                for i in comb:
                    reach |= nbr[i]
                    if nbr[i] & ~mask:
                        inner += 1
                ratio = Fraction(k, inner + bin(reach & ~mask).count("1"))
                if ratio > best_ratio:
                    best_ratio, best_set = ratio, comb
        witness = [ball.points[i] for i in best_set]
        log.debug("isodiametric_exact", space=space.spec, r=r, value=str(best_ratio))
        return ProfilePoint(r, best_ratio, witness, True, "subsets", homogeneous=homogeneous)

    candidates = []
    for k in range(r + 1):
        members = {i for i in range(m) if ball.lengths[i] <= k}
        candidates.append((Fraction(len(members), _boundary_size(members, ball)), f"ball:{k}", members))
    norms = {i: space.box_norm(ball.points[i]) for i in range(m)}
    for k in sorted(set(norms.values())):
        members = {i for i, v in norms.items() if v <= k}
        if 0 in members:
            candidates.append((Fraction(len(members), _boundary_size(members, ball)), f"box:{k}", members))
    ratio, order = _greedy(ball, m)
    candidates.append((ratio, "greedy", set(order)))
    value, family, members = _best(candidates, None)
    witness = [ball.points[i] for i in sorted(members)]
    return ProfilePoint(r, value, witness, False, family, homogeneous=homogeneous)


def functional_form(eta: dict[PointCode, Fraction], f: GrowthFunction, ball: BallIndex) -> tuple[Fraction, Fraction]:
    """(sum |eta|, sum over ordered neighbor pairs of |eta(x) - eta(y)|·f(|(x,y)|))."""
    lhs = sum((abs(v) for v in eta.values()), Fraction(0))
    rhs = Fraction(0)
    for i, j in ball.edges():
        p, q = ball.points[i], ball.points[j]
        diff = abs(eta.get(p, Fraction(0)) - eta.get(q, Fraction(0)))
        if diff:
            rhs += 2 * diff * f.value(ball.edge_length(i, j))
    return lhs, rhs


@dataclass
class CoareaReport:
    trials: int
    violations: int = 0
    functional_constant: Fraction = Fraction(0)
    set_constant: Fraction = Fraction(0)
    failures: list[dict] = field(default_factory=list)


def coarea_validate(space: Space, f: GrowthFunction, trials: int, seed: int = 0, R: int = 5) -> CoareaReport:
    """Check the level-set decomposition of the functional inequality on random eta, exactly."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    ball = build_ball(space, R + 1)
    support = [ball.points[i] for i in ball.interior_indices()]
    rng = np.random.default_rng(seed)
    report = CoareaReport(trials)
    for trial in range(trials):
        M = int(rng.integers(1, 9))
        chosen = rng.random(len(support)) < 0.5
        levels = rng.integers(-M, M + 1, size=len(support))
        eta = {p: Fraction(int(k), M) for p, k, c in zip(support, levels, chosen) if c and k}
        abs_eta = {p: abs(v) for p, v in eta.items()}
        lhs, rhs = functional_form(eta, f, ball)
        _, rhs_abs = functional_form(abs_eta, f, ball)

        level_sets = [{p for p, v in abs_eta.items() if v >= Fraction(i, M)} for i in range(1, M + 1)]
        coarea_lhs = Fraction(0)
        coarea_rhs = Fraction(0)
        set_ratios = []
        problems = []
        for A in level_sets:
            indicator = dict.fromkeys(A, Fraction(1))
            a_lhs, a_rhs = functional_form(indicator, f, ball)
            edge_form = 2 * sum((f.value(max(ball.length(p), ball.length(q))) for p, q in edge_boundary(A, ball)), Fraction(0))
            if a_rhs != edge_form:
                problems.append("indicator_edge_form")
            coarea_lhs += a_lhs / M
            coarea_rhs += a_rhs / M
            if A:
                set_ratios.append(a_lhs / a_rhs)
        if coarea_lhs != lhs or coarea_rhs != rhs_abs:
            problems.append("coarea_identity")
        if rhs_abs > rhs:
            problems.append("triangle")
        if rhs_abs and lhs / rhs_abs > max(set_ratios, default=Fraction(0)):
            problems.append("mediant")
        if rhs:
            report.functional_constant = max(report.functional_constant, lhs / rhs)
        report.set_constant = max([report.set_constant, *set_ratios])
        if problems:
            report.violations += 1
            report.failures.append({"trial": trial, "levels": M, "checks": problems})
    if report.violations:
        log.warning("coarea_violations", space=space.spec, f=f.spec, violations=report.violations)
    return report


@dataclass
class ProfileBoundReport:
    K: Fraction
    degree: int
    checked: int = 0
    violations: list[int] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def profile_bound_check(points: list[ProfilePoint], K: Fraction, f: GrowthFunction, degree: int, R: int) -> ProfileBoundReport:
    """D(r) <= degree·K·f(r+1) for r <= R-1 whenever K is feasible at radius R."""
    report = ProfileBoundReport(Fraction(K), degree)
    for p in points:
        if p.r > R - 1:
            continue
        report.checked += 1
        if p.value > degree * report.K * f.value(p.r + 1):
            report.violations.append(p.r)
    return report


def profile_cell(space_spec: str, r: int, mode: str) -> tuple[int, str, str]:
    """Picklable sweep cell: (r, D(r) as a string, winning family)."""
    point = isodiametric_profile(parse_space(space_spec), r, ProfileMode(mode))
    return r, str(point.value), point.family
