import numpy as np
import pytest

from jcsmc import cvxcore
from jcsmc.errors import InvalidArgument, NeedsPhaseOne
from jcsmc.validation import solver_examples

from oracles import brute_force, random_convex_instance


def test_closed_form_examples():
    for check in solver_examples():
        assert check.passed, check.line()


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("cubic", [False, True])
def test_matches_brute_force(seed, cubic):
    rng = np.random.default_rng(seed)
    prob, x0 = random_convex_instance(rng, cubic)
    res = cvxcore.solve(prob, x0)
    ref, _ = brute_force(prob)
    assert res.objective <= ref + 1e-4
    assert res.objective >= ref - 1e-4
    assert res.max_violation <= 1e-7
    assert res.kkt_residual <= 1e-7


def test_complex_embedding():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    A = B @ B.conj().T
    b = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    p = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    x = cvxcore.to_real(p)
    assert np.allclose(cvxcore.to_complex(x), p)
    assert x @ cvxcore.hermitian_to_real(A) @ x == pytest.approx(np.real(np.vdot(p, A @ p)))
    assert cvxcore.linear_to_real(b) @ x == pytest.approx(np.real(np.vdot(b, p)))


def test_infeasible_start_needs_phase_one():
    prob = cvxcore.ConvexSubproblem(c=np.array([1.0]), constraints=[cvxcore.Constraint(q=np.array([1.0]), r=-1.0)])
    with pytest.raises(NeedsPhaseOne):
        cvxcore.solve(prob, np.array([2.0]))
    x = cvxcore.phase_one(prob, np.array([2.0]))
    assert prob.max_violation(x) < 0


def test_phase_one_reports_empty_set():
    # x <= -1 and x >= 1
    prob = cvxcore.ConvexSubproblem(c=np.array([1.0]), constraints=[
        cvxcore.Constraint(q=np.array([1.0]), r=1.0), cvxcore.Constraint(q=np.array([-1.0]), r=1.0)])
    with pytest.raises(NeedsPhaseOne):
        cvxcore.phase_one(prob, np.array([0.0]))


def test_rejects_bad_cubic_and_box():
    with pytest.raises(InvalidArgument):
        cvxcore.ConvexSubproblem(c=np.zeros(1), constraints=[cvxcore.Constraint(q=np.zeros(1), cubic=np.array([1.0]))])
    with pytest.raises(InvalidArgument):
        cvxcore.ConvexSubproblem(c=np.zeros(1), lb=np.array([1.0]), ub=np.array([0.0]))


def test_convexity_check():
    bad = cvxcore.ConvexSubproblem(c=np.zeros(2), constraints=[
        cvxcore.Constraint(q=np.zeros(2), P=np.diag([1.0, -1.0]))])
    with pytest.raises(InvalidArgument):
        bad.check_convexity()


def test_iterates_stay_feasible_and_trace_dumps(tmp_path):
    rng = np.random.default_rng(3)
    prob, x0 = random_convex_instance(rng)
    path = tmp_path / "trace.csv"
    res = cvxcore.solve(prob, x0, trace_path=path)
    assert all(row[3] < 0 for row in res.trace)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,mu,objective,max_violation"
    assert len(lines) == len(res.trace) + 1


def test_duals_satisfy_complementarity():
    # min -x - y  s.t.  x^2 + y^2 <= 1: multiplier 1/sqrt(2)
    prob = cvxcore.ConvexSubproblem(c=np.array([-1.0, -1.0]), constraints=[
        cvxcore.Constraint(q=np.zeros(2), r=-1.0, P=np.eye(2))])
    res = cvxcore.solve(prob, np.zeros(2), tol=1e-10)
    assert np.allclose(res.x, [2 ** -0.5] * 2, atol=1e-8)
    assert res.duals[0] == pytest.approx(2 ** -0.5, rel=1e-6)
