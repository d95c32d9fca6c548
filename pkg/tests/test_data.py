import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from amenet.data import (
    AffiliationDataset,
    balance_proportion,
    balance_randomization_test,
    cycle_census,
    expected_balance_under_independence,
    load_dataset,
    project,
    tie_density,
)
from amenet.errors import DataError

from conftest import FIXTURES, naive_census, write

binary = arrays(np.int8, st.tuples(st.integers(2, 8), st.integers(2, 8)), elements=st.integers(0, 1))


# ---------------------------------------------------------------- ingestion


def test_load_toy(toy_files):
    ds = load_dataset(*toy_files)
    np.testing.assert_array_equal(ds.Y, [[1, 0], [1, 0], [0, 0]])
    assert ds.actor_ids == ("a1", "a2", "a3")
    assert ds.actor_marks == ("A", "B", "A")
    assert ds.actor_covariate_names == ("gender=girl",)
    np.testing.assert_array_equal(ds.actor_covariates[:, 0], [0, 1, 1])
    np.testing.assert_array_equal(ds.event_covariates[:, 0], [3, 5])
    assert ds.dyad_covariates.shape == (3, 2, 1)


def test_base_level_override(toy_files):
    ds = load_dataset(*toy_files, base_levels={"gender": "girl"})
    assert ds.actor_covariate_names == ("gender=boy",)
    with pytest.raises(DataError, match="base level"):
        load_dataset(*toy_files, base_levels={"gender": "other"})


def test_grouping_or_merge(tmp_path):
    e = write(tmp_path / "e.csv", "actor_id,event_id\na1,Band8th\na1,BandJazz\na2,BandJazz\na3,Chess")
    a = write(tmp_path / "a.csv", "actor_id\na1\na2\na3")
    v = write(tmp_path / "v.csv", "event_id,size\nBand8th,2\nBandJazz,4\nChess,1")
    g = write(tmp_path / "g.csv", "event_id,group\nBand8th,Band\nBandJazz,Band")
    ds = load_dataset(e, a, v, g)
    assert ds.event_ids == ("Band", "Chess")
    np.testing.assert_array_equal(ds.Y, [[1, 0], [1, 0], [0, 1]])
    np.testing.assert_allclose(ds.event_covariates[:, 0], [3.0, 1.0])


def test_fixture_grouping_yields_37_events():
    d = FIXTURES / "magnet_synth"
    ds = load_dataset(d / "edges.csv", d / "actors.csv", d / "events.csv", d / "grouping.csv")
    exp = json.loads((d / "expected.json").read_text())
    assert ds.Y.shape == (905, 37)
    assert list(ds.event_ids) == exp["event_ids"]
    assert int(ds.Y.sum()) == exp["n_ties"]
    np.testing.assert_array_equal(ds.Y.sum(axis=0), exp["event_degrees"])


@pytest.mark.parametrize(
    "edges, actors, events, message",
    [
        ("actor_id,event_id,weight\na1,e1,2", "actor_id\na1", "event_id\ne1", "non-binary"),
        ("actor_id,event_id\na9,e1", "actor_id\na1", "event_id\ne1", "unknown actor id 'a9'"),
        ("actor_id,event_id\na1,e9", "actor_id\na1", "event_id\ne1", "unknown event id 'e9'"),
        ("actor_id,event_id\na1,e1", "actor_id\na1\na1", "event_id\ne1", "duplicate actor"),
        ("actor_id,event_id\na1,e1", "actor_id\na1", "event_id\ne1\ne1", "duplicate event"),
        ("actor_id,event_id", "actor_id", "event_id\ne1", "empty"),
        ("actor_id,event_id\na1,e1", "actor_id,age\na1,", "event_id\ne1", "missing value"),
        ("actor,event_id\na1,e1", "actor_id\na1", "event_id\ne1", "first column"),
    ],
)
def test_load_errors(tmp_path, edges, actors, events, message):
    e = write(tmp_path / "e.csv", edges)
    a = write(tmp_path / "a.csv", actors)
    v = write(tmp_path / "v.csv", events)
    with pytest.raises(DataError, match=message):
        load_dataset(e, a, v)


def test_zero_weight_is_no_tie(tmp_path):
    e = write(tmp_path / "e.csv", "actor_id,event_id,weight\na1,e1,0\na2,e1,1")
    a = write(tmp_path / "a.csv", "actor_id\na1\na2")
    v = write(tmp_path / "v.csv", "event_id\ne1")
    np.testing.assert_array_equal(load_dataset(e, a, v).Y, [[0], [1]])


def test_missing_file_is_data_error(tmp_path):
    with pytest.raises(DataError, match="not found"):
        load_dataset(tmp_path / "nope.csv", tmp_path / "a.csv", tmp_path / "v.csv")


def test_dataset_validation():
    with pytest.raises(DataError):
        AffiliationDataset.from_matrix([[0, 2]])
    with pytest.raises(DataError):
        AffiliationDataset.from_matrix(np.zeros((0, 3)))
    with pytest.raises(DataError):
        AffiliationDataset.from_matrix([[0, 1]], actor_covariates=np.ones((2, 1)))


# ---------------------------------------------------------------- projections


def test_projection_examples():
    Y = np.array([[1, 0], [1, 0], [0, 0]])
    np.testing.assert_array_equal(project(Y, "actor"), [[1, 1, 0], [1, 1, 0], [0, 0, 0]])
    np.testing.assert_array_equal(project(Y, "event"), [[2, 0], [0, 0]])
    np.testing.assert_array_equal(project(np.eye(2, dtype=int), "actor"), np.eye(2))
    with pytest.raises(ValueError):
        project(Y, "dyad")


@settings(max_examples=60, deadline=None)
@given(binary)
def test_actor_projection_psd_and_degree_diagonal(Y):
    P = project(Y, "actor")
    assert np.issubdtype(P.dtype, np.integer)
    np.testing.assert_array_equal(P, P.T)
    np.testing.assert_array_equal(np.diag(P), Y.sum(axis=1))
    assert np.linalg.eigvalsh(P.astype(float)).min() > -1e-9


# ---------------------------------------------------------------- balance statistics


def test_tie_density_examples():
    assert tie_density(np.zeros((3, 4))) == 0.0
    assert tie_density(np.array([[1, 0], [0, 1]])) == 0.5
    assert tie_density(np.array([[1, 0], [1, 0], [0, 0]])) == pytest.approx(1 / 3)


def test_tetrad_examples():
    full = cycle_census(np.ones((2, 2), dtype=int))
    assert full.balanced == 1 and full.configurations["C4"] == 1
    three = cycle_census(np.array([[1, 1], [1, 0]]))
    assert three.balanced == 0 and three.by_tie_count[3] == 1
    assert balance_proportion(np.zeros((4, 3))) == 1.0
    assert balance_proportion(np.array([[1, 0], [0, 1]])) == 1.0
    assert cycle_census(np.array([[1, 0], [0, 1]])).configurations["1-L2"] == 1
    assert cycle_census(np.array([[1, 1], [0, 0]])).configurations["1-L_A2"] == 1
    assert cycle_census(np.array([[1, 0], [1, 0]])).configurations["1-L_E2"] == 1


def test_census_needs_two_per_mode():
    with pytest.raises(DataError):
        cycle_census(np.ones((1, 5)))
    with pytest.raises(DataError):
        balance_proportion(np.ones((5, 1)))


@settings(max_examples=200, deadline=None)
@given(binary)
def test_census_matches_naive_enumeration(Y):
    c = cycle_census(Y)
    by, two, balanced = naive_census(Y)
    assert [c.by_tie_count[n] for n in range(5)] == by
    assert c.two_tie_breakdown == two
    assert c.balanced == balanced
    n_a, n_e = Y.shape
    assert c.total_tetrads == n_a * (n_a - 1) // 2 * n_e * (n_e - 1) // 2
    assert c.balanced == c.by_tie_count[0] + c.by_tie_count[2] + c.by_tie_count[4]
    assert balance_proportion(Y) == pytest.approx(c.proportion, abs=1e-15)
    assert 0.0 <= c.proportion <= 1.0


@settings(max_examples=60, deadline=None)
@given(binary)
def test_agreement_identity(Y):
    """Balanced count equals the sum over event pairs of C(agree,2) + C(disagree,2)."""
    n_a, n_e = Y.shape
    total = 0
    for k in range(n_e):
        for l in range(k + 1, n_e):
            m = int(np.sum(Y[:, k] == Y[:, l]))
            total += m * (m - 1) // 2 + (n_a - m) * (n_a - m - 1) // 2
    assert cycle_census(Y).balanced == total


def test_independence_balance_values():
    assert expected_balance_under_independence(0.0) == 1.0
    assert expected_balance_under_independence(1.0) == 1.0
    assert expected_balance_under_independence(0.5) == 0.5
    # closed form evaluated with exact rationals
    from fractions import Fraction

    p = Fraction(705, 10000)
    q = 1 - p
    exact = p**4 + q**4 + 6 * p**2 * q**2
    assert expected_balance_under_independence(0.0705) == pytest.approx(float(exact), abs=1e-15)
    for bad in (-0.1, 1.2):
        with pytest.raises(ValueError):
            expected_balance_under_independence(bad)


@given(st.floats(0.0, 1.0))
def test_independence_balance_symmetry(p):
    pi = expected_balance_under_independence(p)
    assert pi == pytest.approx(expected_balance_under_independence(1.0 - p), abs=1e-14)
    assert 0.5 - 1e-15 <= pi <= 1.0 + 1e-15


def test_independence_balance_minimum_on_grid():
    grid = np.linspace(0, 1, 2001)
    vals = np.array([expected_balance_under_independence(p) for p in grid])
    assert grid[vals.argmin()] == pytest.approx(0.5)
    assert vals.min() == pytest.approx(0.5)


def test_null_mean_matches_independence_formula():
    rng = np.random.default_rng(0)
    Y = (rng.random((120, 15)) < 0.2).astype(np.int8)
    res = balance_randomization_test(Y, n_reps=200, seed=3)
    pi = expected_balance_under_independence(res.p0)
    se = res.null_proportions.std(ddof=1) / np.sqrt(200)
    assert abs(res.null_proportions.mean() - pi) < 4 * se + 2e-3


def test_randomization_contract():
    assert balance_randomization_test(np.zeros((5, 4)), n_reps=7, seed=1).p_value == 1.0
    rng = np.random.default_rng(2)
    Y = (rng.random((30, 6)) < 0.3).astype(np.int8)
    a = balance_randomization_test(Y, n_reps=20, seed=9)
    b = balance_randomization_test(Y, n_reps=20, seed=9, n_jobs=4)
    np.testing.assert_array_equal(a.null_proportions, b.null_proportions)
    assert 0.0 <= a.p_value <= 1.0
    c = balance_randomization_test(Y, n_reps=20, seed=10)
    assert not np.array_equal(a.null_proportions, c.null_proportions)
    with pytest.raises(ValueError):
        balance_randomization_test(Y, n_reps=0)
