import math

import numpy as np
import pytest

from cpcising.cpc import propagate
from cpcising.error_model import ErrorModel, QubitErrorRates, unprotected_error_rate
from cpcising.evaluation import (
    CSV_HEADER,
    format_sweep_csv,
    exact_logical_error_rate,
    monte_carlo_logical_error_rate,
    sweep,
    threshold_bisection,
    threshold_gap,
)
from cpcising.exceptions import BracketError, CapacityError

from .oracles import all_paulis, qubit_probability


@pytest.fixture(scope="module")
def pattern_table(code513):
    """(pattern string, syndrome index, logical class) for every 513 pattern, by direct propagation."""
    rows = []
    for p in all_paulis(5):
        syn, logical = propagate(code513, p)
        s = sum(int(b) << j for j, b in enumerate(syn))
        rows.append((str(p), s, int(logical[0]) | int(logical[1]) << 1))
    return rows


def class_mass(table, rates):
    mass = np.zeros((16, 4))
    for s_str, s, c in table:
        mass[s, c] += math.prod(qubit_probability(rates, ch) for ch in s_str)
    return mass


@pytest.mark.parametrize("family,p", [("f1", 0.05), ("f2", 0.12), ("f3", 0.02), ("f1", 0.3)])
def test_maxent_rate_matches_oracle(prop513, pattern_table, family, p):
    rates = QubitErrorRates.from_family(family, p)
    mass = class_mass(pattern_table, rates)
    # the best single class per syndrome wins; everything else is a logical error
    expect = 1.0 - mass.max(axis=1).sum()
    got = exact_logical_error_rate(prop513, ErrorModel(rates, 5), "maxent")
    assert got.total == pytest.approx(expect, abs=1e-12)


def test_uncorrected_is_probability_of_nontrivial_class(prop513, pattern_table):
    rates = QubitErrorRates.from_family("f2", 0.07)
    mass = class_mass(pattern_table, rates)
    got = exact_logical_error_rate(prop513, ErrorModel(rates, 5), "none")
    np.testing.assert_allclose(got.per_qubit[0], mass.sum(axis=0), atol=1e-14)
    assert got.total == pytest.approx(1.0 - mass[:, 0].sum(), abs=1e-14)


@pytest.mark.parametrize("strategy", ["mle", "maxent", "none"])
def test_class_rows_normalized(prop933, strategy):
    r = exact_logical_error_rate(prop933, ErrorModel.family("f2", 0.04, 9), strategy)
    assert r.per_qubit.shape == (3, 4)
    np.testing.assert_allclose(r.per_qubit.sum(axis=1), 1.0, atol=1e-12)
    assert r.total == pytest.approx(r.x + r.z + r.y, abs=1e-14)
    assert r.per_qubit_total().mean() == pytest.approx(r.total)


@pytest.mark.parametrize("strategy", ["mle", "maxent"])
def test_quadratic_suppression(prop513, strategy):
    # distance 3: a single error is always corrected, so the rate scales as p^2
    lo, hi = (exact_logical_error_rate(prop513, ErrorModel.family("f1", p, 5), strategy).total
              for p in (1e-3, 2e-3))
    assert 3.8 < hi / lo < 4.1
    bare = [exact_logical_error_rate(prop513, ErrorModel.family("f1", p, 5), "none").total
            for p in (1e-3, 2e-3)]
    assert 1.9 < bare[1] / bare[0] < 2.05


@pytest.mark.parametrize("strategy", ["mle", "maxent"])
def test_cached_equals_uncached(prop513, strategy):
    em = ErrorModel.family("f3", 0.03, 5)
    a = exact_logical_error_rate(prop513, em, strategy)
    b = exact_logical_error_rate(prop513, em, strategy, use_cache=False)
    np.testing.assert_allclose(a.per_qubit, b.per_qubit, atol=1e-12)


def test_threads_do_not_change_result(prop933):
    em = ErrorModel.family("f1", 0.05, 9)
    a = exact_logical_error_rate(prop933, em, "maxent")
    b = exact_logical_error_rate(prop933, em, "maxent", threads=4)
    assert np.array_equal(a.per_qubit, b.per_qubit)


def test_exact_rate_capacity(prop933):
    with pytest.raises(CapacityError):
        exact_logical_error_rate(prop933, ErrorModel.family("f1", 0.05, 9), "mle", cap=8)


def test_monte_carlo_agrees_with_exact(prop513):
    em = ErrorModel.family("f1", 0.05, 5)
    exact = exact_logical_error_rate(prop513, em, "mle").total
    est = monte_carlo_logical_error_rate(prop513, em, "mle", trials=100_000, seed=11)
    assert abs(est.rate - exact) < 4 * est.stderr
    again = monte_carlo_logical_error_rate(prop513, em, "mle", trials=100_000, seed=11)
    assert again == est
    assert "trials" in str(est)


def test_monte_carlo_multi_qubit(prop933):
    em = ErrorModel.family("f2", 0.03, 9)
    exact = exact_logical_error_rate(prop933, em, "maxent").total
    est = monte_carlo_logical_error_rate(prop933, em, "maxent", trials=40_000, seed=2)
    assert abs(est.rate - exact) < 4 * est.stderr


@pytest.mark.parametrize("trials", [0, -5])
def test_monte_carlo_rejects_empty(prop513, trials):
    with pytest.raises(ValueError):
        monte_carlo_logical_error_rate(prop513, ErrorModel.family("f1", 0.05, 5), "mle", trials=trials)


def test_sweep_rows_and_csv(prop513, caplog):
    rows = sweep(prop513, "f1", [0.0, 0.02, 0.05, 0.6])
    assert [r.p for r in rows] == [0.02, 0.05]
    assert sum("skipping" in m for m in caplog.messages) == 2
    for row in rows:
        rates = QubitErrorRates.from_family("f1", row.p)
        assert row.unprotected == pytest.approx(1.0 - rates.p_identity, abs=1e-15)
        assert row.unprotected == pytest.approx(unprotected_error_rate(rates))
        assert row.value("maxent") <= row.value("mle") + 1e-15
    text = format_sweep_csv(rows)
    lines = text.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 3
    assert lines[1].split(",")[0] == "0.02"
    assert all(len(l.split(",")) == len(CSV_HEADER) for l in lines)


def test_sweep_single_strategy_leaves_blank_columns(prop513):
    (row,) = sweep(prop513, "f1", [0.05], strategies=("mle",))
    fields = dict(zip(CSV_HEADER, row.csv_fields()))
    assert fields["maxent"] == "" and fields["mle"] != ""


def test_threshold_513(prop513):
    res = threshold_bisection(prop513, "f1", "mle", tol=1e-6)
    assert res.p == pytest.approx(0.07989, abs=5e-5)
    assert res.width < 1e-6
    assert abs(threshold_gap(prop513, "f1", "mle", res.p)) < 1e-3
    assert res.record()["code"] == prop513.code.name
    below = threshold_gap(prop513, "f1", "mle", 0.05)
    above = threshold_gap(prop513, "f1", "mle", 0.12)
    assert below < 0 < above


def test_bracket_error(prop513):
    with pytest.raises(BracketError):
        threshold_bisection(prop513, "f1", "mle", bracket=(0.003, 0.01))
