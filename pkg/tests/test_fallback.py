import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import alpha_ref
from treespec.fallback import ALPHA_MIN, FallbackController, should_fallback, update_threshold


def test_strict_comparison():
    c = FallbackController(0.01)
    assert should_fallback(0.009, c)
    assert not should_fallback(0.01, c)
    assert should_fallback(0.5, c, eos_drafted=True)


def test_worked_updates():
    assert update_threshold(FallbackController(0.01), 5, 5, 0.3) == 0.005
    assert update_threshold(FallbackController(0.01), 4, 2, 0.04) == pytest.approx(0.05, rel=1e-12)


def test_halving_until_clamp():
    c = FallbackController(0.01)
    k = 0
    while True:
        k += 1
        a = c.update_threshold(3, 3, 0.5)
        if 0.01 * 0.5 ** k < ALPHA_MIN:
            assert a == ALPHA_MIN
            break
        assert a == 0.01 * 0.5 ** k


def test_upper_clamp():
    assert update_threshold(FallbackController(0.5), 2, 0, 0.01) == 1.0


def test_input_errors():
    c = FallbackController()
    with pytest.raises(ValueError):
        c.update_threshold(2, 3, 0.5)
    with pytest.raises(ValueError):
        c.update_threshold(0, 0, 0.5)
    with pytest.raises(ValueError):
        c.update_threshold(2, 1, 0.0)
    with pytest.raises(ValueError):
        FallbackController(0.0)


def test_history_recorded():
    c = FallbackController()
    c.update_threshold(3, 1, 0.2)
    assert c.history == [(3, 1, 0.2)]


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-6, 0.5), st.integers(1, 40), st.data(), st.floats(1e-6, 0.999))
def test_error_update_matches_and_increases(alpha, n_all, data, tc):
    n_correct = data.draw(st.integers(0, n_all - 1))
    c = FallbackController(alpha)
    new = c.update_threshold(n_all, n_correct, tc)
    assert new == pytest.approx(min(1.0, alpha_ref(alpha, n_all, n_correct, tc)), rel=1e-12)
    assert new > alpha
