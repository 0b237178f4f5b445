import itertools

import numpy as np
import pytest

from helpercache import rng as hrng
from helpercache.errors import (
    InvalidParameterError,
    IterationLimitError,
    UnboundedProblemError,
)
from helpercache.simplex import simplex_solve

FEAS_TOL = 1e-8


def enumerate_vertices(c, A, b, upper):
    """Best objective over all basic feasible points of {Ax<=b, 0<=x<=upper}.

    Stacks the row constraints with the box faces and tries every choice of n
    active constraints; singular combinations are filtered by determinant.
    """
    n = c.size
    rows = np.vstack([A, np.eye(n), -np.eye(n)])
    rhs = np.concatenate([b, upper, np.zeros(n)])
    best = None
    combos = np.array(list(itertools.combinations(range(rows.shape[0]), n)))
    mats = rows[combos]
    dets = np.abs(np.linalg.det(mats))
    for combo, mat, det in zip(combos, mats, dets):
        if det < 1e-10:
            continue
        x = np.linalg.solve(mat, rhs[combo])
        if np.any(A @ x > b + FEAS_TOL):
            continue
        if np.any(x < -FEAS_TOL) or np.any(x > upper + FEAS_TOL):
            continue
        val = float(c @ x)
        if best is None or val > best:
            best = val
    return best


def random_lp(rng):
    n = int(rng.integers(2, 9))
    m = int(rng.integers(1, 6))
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    b = rng.uniform(0.5, 2.0, size=m)
    upper = rng.uniform(0.5, 2.0, size=n)
    return c, A, b, upper


def check_solution(c, A, b, upper, result):
    assert np.all(A @ result.x <= b + FEAS_TOL)
    assert np.all(result.x >= -FEAS_TOL)
    assert np.all(result.x <= upper + FEAS_TOL)
    assert result.objective == pytest.approx(float(c @ result.x), abs=1e-9)


def test_matches_vertex_enumeration_on_random_lps():
    rng = hrng.stream(2024, "lp-oracle")
    for _ in range(60):
        c, A, b, upper = random_lp(rng)
        result = simplex_solve(c, A, b, upper)
        check_solution(c, A, b, upper, result)
        assert result.objective == pytest.approx(
            enumerate_vertices(c, A, b, upper), abs=1e-7
        )


def test_degenerate_right_hand_sides():
    # zero entries in b stack several hyperplanes on the origin; the
    # anti-cycling switch has to cope.
    rng = hrng.stream(77, "degenerate")
    for _ in range(25):
        c, A, b, upper = random_lp(rng)
        b[: b.size // 2 + 1] = 0.0
        result = simplex_solve(c, A, b, upper)
        check_solution(c, A, b, upper, result)
        assert result.objective == pytest.approx(
            enumerate_vertices(c, A, b, upper), abs=1e-7
        )


def test_known_small_problems():
    # max 3x+2y st x+y<=4, x+3y<=6 -> (4,0), objective 12
    r = simplex_solve([3, 2], [[1, 1], [1, 3]], [4, 6])
    assert r.objective == pytest.approx(12.0, abs=1e-9)
    np.testing.assert_allclose(r.x, [4.0, 0.0], atol=1e-9)
    # box bound binds before the row constraint
    r = simplex_solve([1, 1], [[1, 1]], [1.5], upper=[1, 1])
    assert r.objective == pytest.approx(1.5, abs=1e-9)
    # negative costs: optimum stays home
    r = simplex_solve([-1, -2], [[1, 1]], [3], upper=[1, 1])
    assert r.objective == pytest.approx(0.0, abs=0)
    np.testing.assert_allclose(r.x, [0.0, 0.0])


def test_upper_bound_flips():
    # optimum needs x1 at its upper bound while x2 enters the basis
    r = simplex_solve([2, 1], [[1, 1]], [3], upper=[2, 5])
    assert r.objective == pytest.approx(5.0, abs=1e-9)
    np.testing.assert_allclose(r.x, [2.0, 1.0], atol=1e-9)


def test_unbounded_detection():
    with pytest.raises(UnboundedProblemError):
        simplex_solve([1.0], np.zeros((0, 1)), np.zeros(0))
    with pytest.raises(UnboundedProblemError):
        simplex_solve([1.0, 1.0], [[1.0, -1.0]], [1.0])


def test_iteration_limit_surfaces():
    with pytest.raises(IterationLimitError):
        simplex_solve([3, 2], [[1, 1], [1, 3]], [4, 6], max_iterations=1)


def test_dimension_validation():
    with pytest.raises(InvalidParameterError):
        simplex_solve([1, 2], [[1, 1, 1]], [1])
    with pytest.raises(InvalidParameterError):
        simplex_solve([1, 2], [[1, 1]], [-1])
