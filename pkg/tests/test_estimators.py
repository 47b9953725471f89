import warnings
from fractions import Fraction

import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from mqkansa import KansaCollocation, ShapeParameterSearch
from mqkansa.precision import PrecisionContext
from mqkansa.problems import make_problem
from mqkansa.search import TabulatedCriterion

SMALL = {"sigma": 1, "a": 0, "b": 3, "dim": 1, "points_per_axis": 9, "n_test_domain": 11}


def test_params_and_clone():
    est = KansaCollocation(problem="paper-2d", c="800*sqrt(2)*1e14", digits=1200)
    params = est.get_params()
    assert params == {"problem": "paper-2d", "beta": -1, "c": "800*sqrt(2)*1e14", "digits": 1200,
                      "estimate_cond": True}
    twin = clone(est).set_params(c="900*sqrt(2)*1e14")
    assert twin.c == "900*sqrt(2)*1e14" and est.c == "800*sqrt(2)*1e14"
    assert clone(ShapeParameterSearch(max_evals=7)).max_evals == 7


def test_fit_predict_score():
    est = KansaCollocation(problem=SMALL, c="0.8", digits=60).fit()
    assert est.problem_.n_data == 9 and est.cond_ > 1
    vals = est.predict([(Fraction(1, 2),), (1,)])
    assert len(vals) == 2
    exact = est.problem_.solution.exact((1,), est.ctx_)
    assert abs(vals[1].log10() - exact.log10()) < 0.1
    rep = est.error_report()
    assert est.score() == pytest.approx(-rep.rms.log10())


def test_fit_accepts_a_problem_object():
    p = make_problem("custom", sigma=1, a=0, b=2, dim=1, points_per_axis=5, n_test_domain=7)
    est = KansaCollocation(c="0.9", digits=60).fit(p)
    assert est.problem_ is p
    with pytest.raises(TypeError):
        KansaCollocation(c=1, digits=60).fit([[1.0]])


def test_unfitted_and_missing_defaults():
    with pytest.raises(NotFittedError):
        KansaCollocation().predict([(1,)])
    with pytest.raises(ValueError):
        KansaCollocation(problem=SMALL, digits=60).fit()


def test_search_estimator_with_tabulated_criterion():
    ctx = PrecisionContext(50)
    crit = TabulatedCriterion({1: 5, 2: 3, 3: 1, 4: 2}, ctx)
    s = ShapeParameterSearch(digits=50, c0="2", steps=["1"]).fit(criterion=crit)
    assert s.best_c_ == 3 and len(s.trace_) == 4 and s.status_ == "converged"
    assert s.best_record_.c == 3


def test_search_estimator_on_a_small_problem():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        s = ShapeParameterSearch(problem=SMALL, digits=60, c0="0.8", steps=["0.2"], max_evals=6).fit()
    assert s.status_ in ("converged", "non_descent", "budget_exhausted", "range_end")
    assert s.best_c_ in [r.c for r in s.trace_]
    assert all(s.best_record_.rms_boundary <= r.rms_boundary for r in s.trace_ if r.ok)
