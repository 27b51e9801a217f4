import hashlib
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import structlog
from scipy.sparse import linalg as spla

from .chains import CONST, GrowthFunction, parse_growth
from .config import get_settings
from .errors import ConvergenceError, NeighborhoodEscapeError
from .spaces import BallIndex, PointCode, Space, ball as build_ball, parse_space

log = structlog.get_logger()


class VertexWeight(str, Enum):
    CONST = "const"
    RECIPROCAL = "reciprocal"


def quadratic_form(eta: dict[PointCode, Fraction], edge_weight: GrowthFunction, ball: BallIndex) -> Fraction:
    """Sum over ordered neighbor pairs of (eta(x) - eta(y))^2 · w(|(x,y)|)."""
    for p, v in eta.items():
        if v and not ball.is_interior(p):
            raise NeighborhoodEscapeError(
                f"support point {ball.space.format_point(p)} is not interior to the ball of radius {ball.radius}"
            )
    total = Fraction(0)
    zero = Fraction(0)
    for i, j in ball.edges():
        d = eta.get(ball.points[i], zero) - eta.get(ball.points[j], zero)
        if d:
            total += d * d * edge_weight.value(ball.edge_length(i, j))
    return 2 * total


@dataclass
class GapResult:
    space: str
    R: int
    edge_weight: str
    vertex_weight: str
    size: int
    lambda_min: float
    poincare_constant: float
    iterations: int
    residual: float


def dirichlet_operators(ball: BallIndex, R: int, edge_weight: GrowthFunction, vertex_weight: VertexWeight):
    """(Q, d) on the points of length <= R, zero boundary values on the sphere beyond."""
    domain = [i for i, n in enumerate(ball.lengths) if n <= R]
    position = {i: k for k, i in enumerate(domain)}
    rows, cols, vals = [], [], []
    diag = np.zeros(len(domain))
    for k, i in enumerate(domain):
        for j in ball.adjacency[i]:
            w = 2.0 * float(edge_weight.value(ball.edge_length(i, j)))
            diag[k] += w
            if j in position:
                rows.append(k)
                cols.append(position[j])
                vals.append(-w)
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(len(domain), len(domain))).tocsr() + sp.diags(diag)
    if vertex_weight == VertexWeight.RECIPROCAL:
        d = np.array([1.0 / float(edge_weight.value(ball.lengths[i])) for i in domain])
    else:
        d = np.ones(len(domain))
    return Q.tocsr(), d


def _start_vector(space: Space, R: int, edge_weight: GrowthFunction, vertex_weight: VertexWeight, n: int) -> np.ndarray:
    key = f"{space.spec}|{R}|{edge_weight.spec}|{vertex_weight.value}".encode()
    seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "big")
    x = np.abs(np.random.default_rng(seed).standard_normal(n)) + 1e-3
    return x / np.linalg.norm(x)


def dirichlet_gap(
    space: Space,
    R: int,
    edge_weight: GrowthFunction = CONST,
    vertex_weight: VertexWeight = VertexWeight.CONST,
) -> GapResult:
    """Smallest lambda with Q v = lambda·diag(rho) v on B_R by inverse iteration with CG solves."""
    settings = get_settings()
    vertex_weight = VertexWeight(vertex_weight)
    ball = build_ball(space, R + 1)
    Q, d = dirichlet_operators(ball, R, edge_weight, vertex_weight)
    n = Q.shape[0]
    scale = sp.diags(1.0 / np.sqrt(d))
    B = (scale @ Q @ scale).tocsr()

    x = _start_vector(space, R, edge_weight, vertex_weight, n)
    lam, residual = float(x @ (B @ x)), float("inf")
    iterations = 0
    while iterations < settings.max_inverse_iterations:
        iterations += 1
        y, info = spla.cg(B, x, x0=x / max(lam, 1e-12), rtol=settings.cg_rtol, maxiter=10 * n + 100)
        if info != 0:
            inner = float(np.linalg.norm(B @ y - x))
            raise ConvergenceError(f"CG did not converge at iteration {iterations} (info={info})", inner)
        x = y / np.linalg.norm(y)
        lam = float(x @ (B @ x))
        v = x / np.sqrt(d)
        residual = float(np.linalg.norm(Q @ v - lam * d * v) / np.linalg.norm(v))
        if residual <= settings.gap_residual:
            break
    else:
        raise ConvergenceError(
            f"inverse iteration stalled after {iterations} steps on {space.spec} R={R}", residual
        )
    log.info("dirichlet_gap", space=space.spec, radius=R, size=n, lambda_min=lam, iterations=iterations)
    return GapResult(
        space=space.spec,
        R=R,
        edge_weight=edge_weight.spec,
        vertex_weight=vertex_weight.value,
        size=n,
        lambda_min=lam,
        poincare_constant=1.0 / lam,
        iterations=iterations,
        residual=residual,
    )


def induced_isoperimetric_constant(gap: GapResult) -> float:
    """K with sum_A rho <= K · sum over the edge boundary of w, for A inside B_R."""
    return 2.0 / gap.lambda_min


def gap_cell(space_spec: str, R: int, f_spec: str, vertex_weight: str) -> tuple[int, float, int, float]:
    gap = dirichlet_gap(parse_space(space_spec), R, parse_growth(f_spec), VertexWeight(vertex_weight))
    return R, gap.lambda_min, gap.iterations, gap.residual
