import math
from fractions import Fraction

import numpy as np
import pytest

from coarsebound.certify import DivergenceProblem, FlowCertificate, bww_check, fundamental_supply, solve
from coarsebound.chains import CONST, LINEAR, Chain
from coarsebound.errors import NeighborhoodEscapeError
from coarsebound.spaces import ball, parse_space
from coarsebound.spectral import (
    VertexWeight,
    dirichlet_gap,
    gap_cell,
    induced_isoperimetric_constant,
    quadratic_form,
)


def test_quadratic_form_of_indicator(z1, z2):
    assert quadratic_form({z2.basepoint: Fraction(1)}, CONST, ball(z2, 2)) == 8
    assert quadratic_form({z1.basepoint: Fraction(1)}, CONST, ball(z1, 2)) == 4


def test_quadratic_form_needs_interior_support(z2):
    with pytest.raises(NeighborhoodEscapeError):
        quadratic_form({z2.parse_point("2,0"): Fraction(1)}, CONST, ball(z2, 2))


@pytest.mark.parametrize("R", [0, 1, 3, 6, 10])
def test_lattice_line_closed_form(z1, R):
    gap = dirichlet_gap(z1, R)
    assert gap.size == 2 * R + 1
    assert gap.lambda_min == pytest.approx(8 * math.sin(math.pi / (4 * R + 4)) ** 2, abs=1e-6)
    assert gap.residual <= 1e-8


@pytest.mark.parametrize("R", [3, 4, 5])
def test_free_group_gap_stays_open(free2, R):
    assert dirichlet_gap(free2, R).lambda_min >= 1.07


def test_rayleigh_upper_bound(z2):
    R = 3
    gap = dirichlet_gap(z2, R)
    b = ball(z2, R + 1)
    eta = {p: Fraction(R + 1 - n) for p, n in zip(b.points, b.lengths) if n <= R}
    norm = sum(v * v for v in eta.values())
    assert gap.lambda_min <= float(quadratic_form(eta, CONST, b) / norm) + 1e-8


def test_domain_monotonicity(z2):
    values = [dirichlet_gap(z2, R).lambda_min for R in range(1, 5)]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


def test_reciprocal_weight_raises_gap(z2):
    const = dirichlet_gap(z2, 3, LINEAR, VertexWeight.CONST)
    reciprocal = dirichlet_gap(z2, 3, LINEAR, VertexWeight.RECIPROCAL)
    assert reciprocal.lambda_min >= const.lambda_min - 1e-9
    assert reciprocal.vertex_weight == "reciprocal"


def test_gap_bounds_flow_constant(z2):
    R = 3
    gap = dirichlet_gap(z2, R)
    K = Fraction(induced_isoperimetric_constant(gap)) * Fraction(1001, 1000)
    b = ball(z2, R + 1)
    assert isinstance(solve(DivergenceProblem(b, fundamental_supply(b), K)), FlowCertificate)


def test_gap_cell_matches_direct_call(z1):
    R, lam, iterations, residual = gap_cell("zd:1", 4, "const", "const")
    assert R == 4
    assert lam == pytest.approx(dirichlet_gap(z1, 4).lambda_min)
    assert iterations >= 1
    assert residual <= 1e-8


def test_rayleigh_bound_on_random_functions(z2):
    R = 3
    gap = dirichlet_gap(z2, R)
    b = ball(z2, R + 1)
    domain = [p for p, n in zip(b.points, b.lengths) if n <= R]
    rng = np.random.default_rng(5)
    for _ in range(100):
        eta = {p: Fraction(int(rng.integers(-20, 21)), int(rng.integers(1, 8))) for p in domain}
        norm = sum(v * v for v in eta.values())
        if not norm:
            continue
        assert gap.lambda_min <= float(quadratic_form(eta, CONST, b) / norm) + 1e-8


@pytest.mark.parametrize("spec", ["zd:2", "free:2"])
def test_larger_edge_weights_raise_gap(spec):
    space = parse_space(spec)
    const = dirichlet_gap(space, 3, CONST)
    linear = dirichlet_gap(space, 3, LINEAR)
    assert linear.lambda_min >= const.lambda_min - 1e-9


@pytest.mark.parametrize("spec", ["zd:2", "heis", "lamp:1", "free:2", "bs:1:2"])
def test_open_gap_rules_out_witnesses(spec):
    space = parse_space(spec)
    R = 3
    gap = dirichlet_gap(space, R)
    if gap.lambda_min < 0.5:
        pytest.skip(f"lambda_min {gap.lambda_min:.3f} below 0.5")
    b = ball(space, R + 1)
    ones = Chain.zero_chain({p: Fraction(1) for p in b.points})
    K = Fraction(induced_isoperimetric_constant(gap)) * Fraction(1001, 1000)
    assert isinstance(bww_check(space, ones, R + 1, K, b), FlowCertificate)
