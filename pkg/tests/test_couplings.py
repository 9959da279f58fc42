import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from generators import random_distribution, random_joint
from gibbslab.couplings import (
    Coupling,
    PathChain,
    SiteMetric,
    compose_path,
    expected_metric,
    identity_coupling,
    independent_coupling,
    mismatch,
    monotone_correlation_check,
    optimal_coupling,
    rho_volume,
    telescope_bound_check,
)
from gibbslab.errors import CouplingError, ModelError, SpaceMismatch
from gibbslab.measures import tv_distance
from gibbslab.spaces import ConfigSpace, FiniteDistribution

ONE = ConfigSpace(("a",), 2)
TWO = ConfigSpace(("a", "b"), 2)


def d(probs, space=ONE):
    return FiniteDistribution(space, probs)


def coupling(joint, space=ONE):
    return Coupling(space, space, joint)


# -- constructors ------------------------------------------------------------


def test_independent_point_masses():
    Q = independent_coupling(FiniteDistribution.point_mass(TWO, 1), FiniteDistribution.point_mass(TWO, 2))
    expected = np.zeros((4, 4))
    expected[1, 2] = 1.0
    np.testing.assert_array_equal(Q.joint, expected)


def test_independent_uniform():
    Q = independent_coupling(d([0.5, 0.5]), d([0.5, 0.5]))
    np.testing.assert_array_equal(Q.joint, np.full((2, 2), 0.25))


def test_independent_product():
    Q = independent_coupling(d([0.3, 0.7]), d([0.6, 0.4]))
    np.testing.assert_allclose(Q.joint, [[0.18, 0.12], [0.42, 0.28]], atol=1e-15)


@pytest.mark.parametrize(
    "probs",
    [[0.5, 0.5], [1.0, 0.0], [0.2, 0.3, 0.5]],
)
def test_identity_is_diagonal(probs):
    space = ConfigSpace(("a",), len(probs))
    Q = identity_coupling(d(probs, space))
    np.testing.assert_array_equal(Q.joint, np.diag(probs))
    assert mismatch(Q) == 0.0


def test_optimal_equal_marginals_is_identity():
    mu = d([0.2, 0.8])
    np.testing.assert_array_equal(optimal_coupling(mu, mu).joint, identity_coupling(mu).joint)


def test_optimal_against_point_mass():
    Q = optimal_coupling(d([0.5, 0.5]), d([1.0, 0.0]))
    np.testing.assert_array_equal(Q.joint, [[0.5, 0.0], [0.5, 0.0]])
    assert mismatch(Q) == 0.5


def test_optimal_disjoint_supports():
    Q = optimal_coupling(FiniteDistribution.point_mass(TWO, 0), FiniteDistribution(TWO, [0, 0.5, 0.5, 0]))
    assert np.trace(Q.joint) == 0.0
    assert mismatch(Q) == 1.0


def test_coupling_rejects_bad_tables():
    with pytest.raises(CouplingError):
        coupling([[0.5, 0.5], [0.5, 0.5]])
    with pytest.raises(CouplingError):
        coupling([[1.5, -0.5], [0.0, 0.0]])
    with pytest.raises(CouplingError):
        coupling([[1.0, 0.0]])


# -- mismatch / metrics ------------------------------------------------------


def test_mismatch_independent_uniform():
    assert mismatch(independent_coupling(d([0.5, 0.5]), d([0.5, 0.5]))) == 0.5


def test_mismatch_needs_same_space():
    Q = Coupling(ONE, ConfigSpace(("b",), 2), np.full((2, 2), 0.25))
    with pytest.raises(SpaceMismatch):
        mismatch(Q)


def test_expected_metric_identity():
    mu = FiniteDistribution(TWO, [0.1, 0.2, 0.3, 0.4])
    assert expected_metric(identity_coupling(mu), SiteMetric.discrete(TWO.sites, 2)) == 0.0


def test_expected_metric_independent_uniform():
    Q = independent_coupling(d([0.5, 0.5]), d([0.5, 0.5]))
    assert expected_metric(Q, SiteMetric.discrete(["a"], 2)) == 0.5


def test_expected_metric_scales_linearly():
    rng = np.random.default_rng(4)
    Q = Coupling(TWO, TWO, random_joint(rng, 4, 4))
    rho = SiteMetric({"a": [[0, 1.5], [1.5, 0]], "b": [[0, 0.25], [0.25, 0]]})
    assert expected_metric(Q, rho.scaled(4.0)) == 4.0 * expected_metric(Q, rho)


def test_site_metric_validation():
    with pytest.raises(ModelError):
        SiteMetric({"a": [[0, 1], [2, 0]]})
    with pytest.raises(ModelError):
        SiteMetric({"a": [[1, 1], [1, 0]]})
    with pytest.raises(ModelError):
        SiteMetric({"a": [[0, 0], [0, 0]]})
    assert SiteMetric({"a": [[0, 3], [3, 0]], "b": [[0, 0.5], [0.5, 0]]}).inf_gap == 0.5


def test_rho_volume_identity_and_empty():
    rng = np.random.default_rng(1)
    mu = FiniteDistribution(TWO, random_distribution(rng, 4))
    rho = SiteMetric.discrete(TWO.sites, 2)
    Q = identity_coupling(mu)
    for window in ([], ["a"], ["b"], ["a", "b"]):
        assert rho_volume(Q, rho, window) == 0.0
    Q = independent_coupling(mu, FiniteDistribution(TWO, random_distribution(rng, 4)))
    assert rho_volume(Q, rho, []) == 0.0


def test_rho_volume_brute_double_sum():
    rng = np.random.default_rng(9)
    space = ConfigSpace(("a", "b"), 3)
    J = random_joint(rng, 9, 9)
    Q = Coupling(space, space, J)
    tables = [np.array([[0, 1, 2], [1, 0, 1.5], [2, 1.5, 0]]), np.array([[0, 0.3, 0.3], [0.3, 0, 0.3], [0.3, 0.3, 0]])]
    rho = SiteMetric({"a": tables[0], "b": tables[1]})
    assert rho_volume(Q, rho, ["a", "b"]) == pytest.approx(oracles.rho_double_sum(J, 2, 3, tables, [0, 1]), abs=1e-14)
    assert rho_volume(Q, rho, ["b"]) == pytest.approx(oracles.rho_double_sum(J, 2, 3, tables, [1]), abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 4), q=st.integers(2, 3))
def test_coupling_inequalities(seed, n, q):
    rng = np.random.default_rng(seed)
    space = ConfigSpace(tuple(f"v{k}" for k in range(n)), q)
    Q = Coupling(space, space, random_joint(rng, space.size, space.size, 0.5))
    mu, nu = Q.row_marginal(), Q.col_marginal()
    assert tv_distance(mu, nu) <= mismatch(Q) + 1e-12
    opt = optimal_coupling(mu, nu)
    assert opt.marginal_residual(mu, nu) <= 1e-12
    assert abs(mismatch(opt) - tv_distance(mu, nu)) <= 1e-12
    tables = {}
    for s in space.sites:
        t = rng.uniform(0.1, 3.0, size=(q, q))
        t = np.triu(t, 1)
        tables[s] = t + t.T
    rho = SiteMetric(tables)
    assert mismatch(Q) <= expected_metric(Q, rho) / rho.inf_gap + 1e-12


# -- path composition --------------------------------------------------------


def _chain(rng, space, n_links, sparsity=0.0):
    """Random chain: each link is a random conditional applied to the previous column marginal."""
    mu = random_distribution(rng, space.size, sparsity)
    links = []
    for _ in range(n_links):
        P = np.vstack([random_distribution(rng, space.size, sparsity) for _ in range(space.size)])
        J = mu[:, None] * P
        links.append(Coupling(space, space, J))
        mu = J.sum(axis=0)
    return links


def test_compose_single_link():
    rng = np.random.default_rng(0)
    links = _chain(rng, TWO, 1)
    assert compose_path(links) is links[0]


def test_compose_identity_links():
    mu = FiniteDistribution(TWO, [0.1, 0.2, 0.3, 0.4])
    out = compose_path([identity_coupling(mu)] * 3)
    np.testing.assert_allclose(out.joint, identity_coupling(mu).joint, atol=1e-16)


def test_compose_three_links_brute():
    rng = np.random.default_rng(12)
    links = _chain(rng, ONE, 3)
    want = oracles.compose_brute([L.joint for L in links])
    np.testing.assert_allclose(compose_path(links).joint, want, atol=1e-15)


def test_chain_interface_mismatch():
    rng = np.random.default_rng(0)
    a = Coupling(ONE, ONE, random_joint(rng, 2, 2))
    b = Coupling(ConfigSpace(("b",), 2), ConfigSpace(("b",), 2), random_joint(rng, 2, 2))
    with pytest.raises(SpaceMismatch):
        PathChain((a, b))
    c = Coupling(ONE, ONE, random_joint(rng, 2, 2))
    with pytest.raises(CouplingError):
        compose_path([a, c])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_links=st.integers(1, 5), n=st.integers(1, 3), q=st.integers(2, 4))
def test_compose_marginals_and_fallback_invariance(seed, n_links, n, q):
    rng = np.random.default_rng(seed)
    space = ConfigSpace(tuple(f"v{k}" for k in range(n)), q)
    if space.size > 64:
        space = ConfigSpace(space.sites[:2], q)
    links = _chain(rng, space, n_links, sparsity=0.4)
    out = compose_path(links)
    assert out.marginal_residual(links[0].row_marginal(), links[-1].col_marginal()) <= 1e-12
    alt = compose_path(links, fallback="uniform")
    assert np.abs(out.joint - alt.joint).max() <= 1e-15


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_links=st.integers(2, 4))
def test_compose_brute_small(seed, n_links):
    rng = np.random.default_rng(seed)
    links = _chain(rng, TWO, n_links, sparsity=0.3)
    want = oracles.compose_brute([L.joint for L in links])
    np.testing.assert_allclose(compose_path(links).joint, want, atol=1e-14)


# -- telescoping -------------------------------------------------------------


def test_telescope_identity_links():
    mu = FiniteDistribution(TWO, [0.1, 0.2, 0.3, 0.4])
    res = telescope_bound_check([identity_coupling(mu)] * 3, SiteMetric.discrete(TWO.sites, 2), TWO.sites)
    assert res == (0.0, 0.0, True)


def test_telescope_single_link_equal():
    rng = np.random.default_rng(5)
    links = _chain(rng, TWO, 1)
    res = telescope_bound_check(links, SiteMetric.discrete(TWO.sites, 2), ["a"])
    assert res.lhs == res.rhs and res.holds


def test_telescope_four_links_brute():
    rng = np.random.default_rng(31)
    links = _chain(rng, TWO, 4)
    rho = SiteMetric.discrete(TWO.sites, 2)
    res = telescope_bound_check(links, rho, TWO.sites)
    disc = [1.0 - np.eye(2)] * 2
    lhs = oracles.rho_double_sum(oracles.compose_brute([L.joint for L in links]), 2, 2, disc, [0, 1])
    rhs = sum(oracles.rho_double_sum(L.joint, 2, 2, disc, [0, 1]) for L in links)
    assert res.lhs == pytest.approx(lhs, abs=1e-14)
    assert res.rhs == pytest.approx(rhs, abs=1e-14)
    assert res.holds


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_links=st.integers(1, 5), q=st.integers(2, 4))
def test_telescope_random(seed, n_links, q):
    rng = np.random.default_rng(seed)
    space = ConfigSpace(("a", "b", "c"), q) if q ** 3 <= 64 else ConfigSpace(("a", "b"), q)
    links = _chain(rng, space, n_links, sparsity=0.2)
    window = [s for s in space.sites if rng.random() < 0.7]
    assert telescope_bound_check(links, SiteMetric.discrete(space.sites, q), window).holds


# -- monotone correlation ----------------------------------------------------


def test_fkg_constant_f():
    res = monotone_correlation_check([0, 1, 2], [0.2, 0.3, 0.5], [4, 4, 4], [0, 1, 7])
    assert res.lhs == pytest.approx(res.rhs, abs=1e-15) and res.holds


def test_fkg_identity_on_two_points():
    res = monotone_correlation_check([0, 1], [0.5, 0.5], [0, 1], [0, 1])
    assert (res.lhs, res.rhs, res.holds) == (0.25, 0.5, True)


def test_fkg_x_and_x_squared():
    third = 1 / 3
    res = monotone_correlation_check([0, 1, 2], [third] * 3, [0, 1, 2], [0, 1, 4])
    # E[x] = 1, E[x^2] = 5/3, E[x^3] = 3
    assert res.lhs == pytest.approx(5 / 3, abs=1e-15)
    assert res.rhs == pytest.approx(3.0, abs=1e-15)
    assert res.holds


def test_fkg_rejects_non_monotone():
    with pytest.raises(ValueError, match="f decreases"):
        monotone_correlation_check([0, 1, 2], [1 / 3] * 3, [0, 2, 1], [0, 1, 2])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0.01, 1), st.floats(-5, 5), st.floats(-5, 5)), min_size=1, max_size=12))
def test_fkg_property(rows):
    w = np.array([r[0] for r in rows])
    p = w / w.sum()
    f = np.sort([r[1] for r in rows])
    g = np.sort([r[2] for r in rows])
    assert monotone_correlation_check(np.arange(len(rows)), p, f, g).holds
