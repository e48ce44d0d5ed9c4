import math

import numpy as np
import pytest
import sympy as sp

from fraclab.catalog import X, RhsEntry, parse_rhs, trace_lift
from fraclab.errors import InsufficientDataError, InvalidArgumentError
from fraclab.grid_ops import elliptic_spec
from fraclab.regularity import (
    DecayFit,
    build_decomposition,
    compare_first_eigenvalues,
    compatibility_experiment,
    first_violation_index,
    fit_boundary_exponent,
    fit_power_decay,
    predicted_boundary_exponent,
    predicted_exponent,
    sobolev_threshold,
)
from fraclab.spectral import forward_coefficients, solve_power

N = 4096


@pytest.fixture(scope="module")
def dirichlet():
    return build_decomposition("dirichlet", N)


@pytest.fixture(scope="module")
def neumann():
    return build_decomposition("neumann", N)


@pytest.fixture(scope="module")
def small():
    return build_decomposition("dirichlet", 64)


def run(pair, bc, a, f, **kw):
    spec, dec = pair
    return compatibility_experiment(bc, a, f, N, dec=dec, spec=spec, **kw)


# --- decay fits ------------------------------------------------------------


def test_synthetic_power_law():
    k = np.arange(1, 1001)
    fit = fit_power_decay(k**-2.5)
    assert fit.exponent == pytest.approx(2.5, abs=1e-6)
    assert fit.r2 >= 0.999999
    assert fit.window == (1, 1000)


def test_masks_and_window():
    k = np.arange(1, 201)
    c = np.where(k % 2, k**-3.0, 1e-3 * k**-1.0)
    assert fit_power_decay(c, "odd").exponent == pytest.approx(3.0)
    assert fit_power_decay(c, "even").exponent == pytest.approx(1.0)
    fit = fit_power_decay(c, "odd", (10, 50))
    assert fit.n_points == 20


def test_floor_and_insufficient_data(small):
    _, dec = small
    c = forward_coefficients(dec, dec.eigenvectors[:, 4])
    with pytest.raises(InsufficientDataError):
        fit_power_decay(c)
    with pytest.raises(InsufficientDataError):
        fit_power_decay(np.ones(7))


def test_unknown_mask():
    with pytest.raises(InvalidArgumentError):
        fit_power_decay(np.ones(20), "prime")


@pytest.mark.parametrize("beta,smax", [(2.0, 1.5), (4.0, 3.5), (2.5, 2.0)])
def test_sobolev_threshold(beta, smax):
    assert sobolev_threshold(DecayFit(beta, 0.0, 1.0, (8, 512), "all", 100)) == smax


def test_predicted_exponent():
    assert predicted_exponent("dirichlet", 0.5, 0) == 2.0
    assert predicted_exponent("dirichlet", 0.5, 1) == 4.0
    assert predicted_exponent("neumann", 0.25, 0) == 2.5
    assert math.isinf(predicted_exponent("neumann", 0.25, math.inf))


# --- compatibility index ------------------------------------------------------


@pytest.mark.parametrize("rhs,m", [("const", 0), ("poly2", 1), ("linear", 0), ("sin:1", math.inf), ("sin:4", math.inf), ("eigen:3", math.inf)])
def test_violation_index_dirichlet(small, rhs, m):
    spec, dec = small
    assert first_violation_index(spec, dec, parse_rhs(rhs)) == m


def test_violation_index_neumann():
    spec, dec = build_decomposition("neumann", 64)
    assert first_violation_index(spec, dec, parse_rhs("linear")) == 0
    assert first_violation_index(spec, dec, parse_rhs("const")) == math.inf
    assert first_violation_index(spec, dec, RhsEntry.from_expr(sp.cos(X))) == math.inf
    # x^2 (3 pi - 2 x) / pi^3: zero flux at both ends, but A f = (12 x - 6 pi) / pi^3 has slope
    cubic = RhsEntry.from_expr(X**2 * (3 * sp.pi - 2 * X) / sp.pi**3)
    assert first_violation_index(spec, dec, cubic) == 1


def test_violation_index_variable_coefficient():
    spec, dec = build_decomposition("dirichlet", 64, "affine:1,0.5")
    # A f = -(a f')' for f = x(pi - x) has nonzero trace for any positive a
    assert first_violation_index(spec, dec, parse_rhs("poly2")) == 1


def test_violation_index_finite_difference_path(small):
    spec, dec = small
    assert first_violation_index(spec, dec, lambda x: np.ones_like(x)) == 0
    assert first_violation_index(spec, dec, lambda x: x * (math.pi - x)) == 1


def test_violation_index_not_evaluable(small):
    spec, dec = small
    with pytest.raises(InvalidArgumentError), np.errstate(divide="ignore"):
        first_violation_index(spec, dec, lambda x: 1.0 / x)
    with pytest.raises(InvalidArgumentError):
        first_violation_index(spec, dec, 3.0)


# --- compatibility experiments ----------------------------------------------


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75])
@pytest.mark.parametrize("rhs,m", [("const", 0), ("poly2", 1)])
def test_threshold_law_dirichlet(dirichlet, a, rhs, m):
    r = run(dirichlet, "dirichlet", a, rhs)
    assert r.violation_index == m
    assert r.predicted_beta == 2 * m + 1 + 2 * a
    assert abs(r.measured_beta - r.predicted_beta) <= 0.15
    assert r.verdict == "pass" and r.tolerance == 0.15
    assert r.measured_smax == pytest.approx(r.measured_beta - 0.5)


def test_constant_example_tight(dirichlet):
    r = run(dirichlet, "dirichlet", 0.5, "const")
    assert abs(r.measured_beta - 2.0) <= 0.1
    assert r.predicted_smax == 1.5


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75])
def test_threshold_law_neumann(neumann, a):
    r = run(neumann, "neumann", a, "linear")
    assert r.violation_index == 0
    assert abs(r.measured_beta - (2 + 2 * a)) <= 0.15
    assert r.verdict == "pass"
    assert r.coefficients["k"][0] == 0  # the constant mode is reported, not fitted


def test_neumann_example_smax(neumann):
    r = run(neumann, "neumann", 0.25, "linear")
    assert r.predicted_beta == 2.5 and r.predicted_smax == 2.0


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75])
def test_variable_coefficient_robustness(a):
    spec, dec = build_decomposition("dirichlet", N, "affine:1,0.5")
    r = compatibility_experiment("dirichlet", a, "const", N, coef="affine:1,0.5", tol=0.2, dec=dec, spec=spec)
    assert abs(r.measured_beta - (1 + 2 * a)) <= 0.2


@pytest.mark.parametrize("a", [0.25, 0.5, 0.75])
def test_dichotomy_jump(dirichlet, a):
    f = RhsEntry.from_expr(sp.exp(X / sp.pi), "exp")
    lifted = f.minus(trace_lift(f, 0.0, math.pi))
    r0 = run(dirichlet, "dirichlet", a, f)
    r1 = run(dirichlet, "dirichlet", a, lifted)
    assert r0.violation_index == 0 and r1.violation_index == 1
    assert r1.measured_beta - r0.measured_beta >= 1.5


@pytest.mark.parametrize("rhs", ["sin:3", "eigen:2"])
def test_super_polynomial(dirichlet, rhs):
    r = run(dirichlet, "dirichlet", 0.5, rhs)
    assert math.isinf(r.violation_index)
    assert r.verdict == "pass"
    assert "super-polynomial" in r.note


def test_report_dict(dirichlet):
    r = run(dirichlet, "dirichlet", 0.5, "const")
    d = r.as_dict()
    assert "coefficients" not in d
    full = r.as_dict(with_coefficients=True)
    assert set(full["coefficients"]) == {"k", "lambda_k", "c_f", "c_u"}
    assert len(full["coefficients"]["c_u"]) == N


def test_experiment_preconditions(small):
    with pytest.raises(InvalidArgumentError):
        compatibility_experiment("dirichlet", 0.5, "const", 512)
    for a in (0.01, 0.97):
        with pytest.raises(InvalidArgumentError):
            compatibility_experiment("dirichlet", a, "const", 1024)


# --- boundary exponents -----------------------------------------------------


@pytest.mark.parametrize("a,theta", [(0.25, 0.5), (0.75, 1.0)])
def test_boundary_exponent(dirichlet, a, theta):
    _, dec = dirichlet
    for side in ("left", "right"):
        fit = fit_boundary_exponent(dec, a, "const", side=side)
        assert fit.defined
        assert abs(fit.exponent - theta) <= 0.05
        assert fit.window[0] == pytest.approx(10 * dec.h)
        assert fit.window[0] > dec.h  # nearest node excluded
    assert predicted_boundary_exponent(a) == theta


@pytest.mark.parametrize("a", [0.75, 0.8, 0.9, 0.95])
def test_boundary_exponent_above_half(dirichlet, a):
    _, dec = dirichlet
    assert fit_boundary_exponent(dec, a, "const").exponent >= 0.95


def test_boundary_exponent_near_half_trend(dirichlet):
    # for a just above 1/2 the d^(2a) correction is barely steeper than d, so
    # the fitted slope sits below 0.95 but rises with a and under refinement
    _, dec = dirichlet
    _, fine = build_decomposition("dirichlet", 2 * N)
    coarse = [fit_boundary_exponent(dec, a, "const").exponent for a in (0.55, 0.6, 0.65, 0.7)]
    refined = [fit_boundary_exponent(fine, a, "const").exponent for a in (0.55, 0.6, 0.65, 0.7)]
    assert all(x < y for x, y in zip(coarse, coarse[1:]))
    assert all(x < y for x, y in zip(coarse, refined))


def test_boundary_exponent_eigenfunction(dirichlet):
    _, dec = dirichlet
    fit = fit_boundary_exponent(dec, 0.4, "eigen:1")
    assert abs(fit.exponent - 1.0) <= 0.02


def test_boundary_trace_vanishes(dirichlet):
    # gamma u = 0: the value at the first node is small and shrinks with h like h^(2a)
    _, dec = dirichlet
    fit = fit_boundary_exponent(dec, 0.25, "const")
    assert fit.trace_ratio < 0.1


def test_boundary_sign_change_reported(dirichlet):
    _, dec = dirichlet
    fit = fit_boundary_exponent(dec, 0.5, "sin:3", window=(0.5, 1.5))
    assert not fit.defined and math.isnan(fit.exponent)
    assert "sign" in fit.note


def test_boundary_preconditions(dirichlet, neumann):
    _, dec = dirichlet
    with pytest.raises(InvalidArgumentError):
        fit_boundary_exponent(dec, 0.5, "const", k_modes=N // 4 + 1)
    with pytest.raises(InvalidArgumentError):
        fit_boundary_exponent(neumann[1], 0.5, "const")
    with pytest.raises(InvalidArgumentError):
        fit_boundary_exponent(dec, 0.5, "const", side="top")


# --- eigenvalue comparison --------------------------------------------------


def test_compare_small():
    r = compare_first_eigenvalues(0.5, 128)
    r2 = compare_first_eigenvalues(0.5, 128, dense_solver="lapack")
    assert r["restricted"] == pytest.approx(r2["restricted"], rel=1e-10)
    assert 0 < r["restricted"] < r["spectral"]
    assert r["gap"] == pytest.approx(r["spectral"] - r["restricted"])


def test_compare_gap_shrinks_toward_one():
    gaps = [compare_first_eigenvalues(a, 256, dense_solver="lapack")["gap"] for a in (0.5, 0.75, 0.9)]
    assert gaps[0] > gaps[1] > gaps[2] > 0


def test_compare_limits():
    with pytest.raises(InvalidArgumentError):
        compare_first_eigenvalues(0.5, 4096)
    with pytest.raises(InvalidArgumentError):
        compare_first_eigenvalues(0.5, 64, dense_solver="power")
