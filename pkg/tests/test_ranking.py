import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xferfv.errors import EstimatorError
from xferfv.ranking import (
    evaluate,
    pearson,
    rank_models,
    weighted_kendall_tau,
)
from xferfv.scoring import ModelScore


def score(model_id, t):
    return ModelScore(model_id=model_id, per_scale=(), transferability=t)


def test_tau_perfect_agreement():
    est = {"a": 0.1, "b": 0.5, "c": 0.9}
    perf = {"a": 0.2, "b": 0.4, "c": 0.6}
    assert weighted_kendall_tau(est, perf) == pytest.approx(1.0, abs=1e-12)


def test_tau_perfect_reversal():
    est = {"a": 0.9, "b": 0.5, "c": 0.1}
    perf = {"a": 0.2, "b": 0.4, "c": 0.6}
    assert weighted_kendall_tau(est, perf) == pytest.approx(-1.0, abs=1e-12)


def test_tau_hand_enumerated_three_model_case():
    # Performance ranks give weights 1, 1/2, 1/3; the single discordant pair
    # carries weight 1/2 + 1/3, so tau = (11/3 - 2 * 5/6) / (11/3) = 6/11.
    perf = {"m1": 3.0, "m2": 2.0, "m3": 1.0}
    est = {"m1": 3.0, "m2": 1.0, "m3": 2.0}
    assert weighted_kendall_tau(est, perf) == pytest.approx(6.0 / 11.0, abs=1e-9)


def test_tau_tied_estimates_zero_numerator_full_denominator():
    est = {"a": 1.0, "b": 1.0}
    perf = {"a": 0.1, "b": 0.2}
    assert weighted_kendall_tau(est, perf) == 0.0


def test_tau_tied_performances_rejected():
    with pytest.raises(EstimatorError):
        weighted_kendall_tau({"a": 1.0, "b": 2.0}, {"a": 0.5, "b": 0.5})


def test_tau_key_mismatch_rejected():
    with pytest.raises(ValueError) as err:
        weighted_kendall_tau({"a": 1.0, "b": 2.0}, {"a": 0.5, "c": 0.7})
    assert "b" in str(err.value) and "c" in str(err.value)


def test_tau_needs_two_models():
    with pytest.raises(EstimatorError):
        weighted_kendall_tau({"a": 1.0}, {"a": 0.5})


@given(
    st.lists(
        st.tuples(st.floats(-100, 100), st.floats(0, 1)),
        min_size=2,
        max_size=8,
    )
)
@settings(max_examples=60, deadline=None)
def test_tau_bounded(pairs):
    est = {f"m{i}": t for i, (t, _) in enumerate(pairs)}
    perf = {f"m{i}": p for i, (_, p) in enumerate(pairs)}
    if len(set(perf.values())) != len(perf):
        return
    tau = weighted_kendall_tau(est, perf)
    assert -1.0 - 1e-12 <= tau <= 1.0 + 1e-12


def test_pearson_exact_linear():
    perf = {"a": 0.1, "b": 0.4, "c": 0.7}
    est = {m: 2 * p + 1 for m, p in perf.items()}
    assert pearson(est, perf) == pytest.approx(1.0, abs=1e-12)
    est_neg = {m: -p for m, p in perf.items()}
    assert pearson(est_neg, perf) == pytest.approx(-1.0, abs=1e-12)


def test_pearson_hand_value():
    est = {"a": 1.0, "b": 2.0, "c": 3.0}
    perf = {"a": 1.0, "b": 2.0, "c": 4.0}
    expected = 3.0 * math.sqrt(3.0) / (2.0 * math.sqrt(7.0))
    assert pearson(est, perf) == pytest.approx(expected, abs=1e-9)


def test_pearson_constant_series_rejected():
    with pytest.raises(EstimatorError):
        pearson({"a": 1.0, "b": 1.0}, {"a": 0.1, "b": 0.2})
    with pytest.raises(EstimatorError):
        pearson({"a": 1.0, "b": 2.0}, {"a": 0.5, "b": 0.5})


def test_rank_models_descending():
    ranked = rank_models([score("a", 0.5), score("b", 0.7)])
    assert [s.model_id for s in ranked] == ["b", "a"]


def test_rank_models_tie_breaks_lexicographically():
    ranked = rank_models([score("z", 1.0), score("a", 1.0), score("m", 2.0)])
    assert [s.model_id for s in ranked] == ["m", "a", "z"]


def test_rank_models_singleton():
    ranked = rank_models([score("only", 0.0)])
    assert [s.model_id for s in ranked] == ["only"]


def test_rank_models_rejects_duplicates_and_empty():
    with pytest.raises(ValueError):
        rank_models([score("a", 1.0), score("a", 2.0)])
    with pytest.raises(ValueError):
        rank_models([])


def test_evaluate_report_shape():
    est = {"a": 0.3, "b": 0.9, "c": 0.1}
    perf = {"a": 0.5, "b": 0.8, "c": 0.2}
    report = evaluate(est, perf)
    assert report.n_models == 3
    assert report.weighted_tau == pytest.approx(1.0)
    assert [r.model_id for r in report.ranking] == ["b", "a", "c"]
    d = report.as_dict()
    assert set(d) == {"weighted_tau", "pearson", "n_models", "ranking"}
    assert d["ranking"][0] == {
        "model_id": "b",
        "estimate": 0.9,
        "performance": 0.8,
    }


def test_evaluate_ranking_tie_break_on_estimates():
    est = {"b": 1.0, "a": 1.0, "c": 2.0}
    perf = {"a": 0.1, "b": 0.2, "c": 0.3}
    report = evaluate(est, perf)
    assert [r.model_id for r in report.ranking] == ["c", "a", "b"]
