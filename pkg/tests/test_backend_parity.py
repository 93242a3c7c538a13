"""The compiled kernel and the NumPy fallback must agree bit for bit.

Both backends draw from the same counter-based streams in the same
documented order, so trained automaton states, stream counters, and
feedback event counts are required to be identical, not just close.
"""

import numpy as np
import pytest

from tmrec.tm import TMConfig, TsetlinMachine, available_backends, get_kernel
from tmrec.exceptions import BackendUnavailable

pytestmark = pytest.mark.skipif(
    "cython" not in available_backends(),
    reason="compiled backend not built",
)


def random_problem(rs, n, f, k):
    X = rs.randint(0, 2, size=(n, f)).astype(np.uint8)
    y = rs.randint(0, k, size=n).astype(np.int64)
    return X, y


def paired(cfg):
    return TsetlinMachine(cfg, backend="python"), TsetlinMachine(cfg, backend="cython")


@pytest.mark.parametrize("k,f,clauses", [(2, 4, 4), (3, 7, 10), (1, 5, 6), (6, 3, 2)])
def test_training_is_bit_identical(k, f, clauses):
    rs = np.random.RandomState(100 + k)
    X, y = random_problem(rs, 150, f, k)
    cfg = TMConfig(num_features=f, num_classes=k, clauses_per_class=clauses,
                   threshold=6, specificity=3.2, seed=77)
    py, cy = paired(cfg)
    for _ in range(4):
        sp = py.train_epoch(X, y)
        sc = cy.train_epoch(X, y)
        assert (sp.type_i_events, sp.type_ii_events) == (sc.type_i_events, sc.type_ii_events)
        assert np.array_equal(py.ta_state, cy.ta_state)
        assert np.array_equal(py.stream_counters, cy.stream_counters)


def test_inference_matches_on_random_states():
    rs = np.random.RandomState(5)
    cfg = TMConfig(num_features=9, num_classes=4, clauses_per_class=8,
                   threshold=3, states_per_action=20, seed=0)
    py, cy = paired(cfg)
    state = rs.randint(1, 41, size=py.ta_state.shape).astype(np.int16)
    py.ta_state[:] = state
    cy.ta_state[:] = state
    X = rs.randint(0, 2, size=(64, 9)).astype(np.uint8)
    assert np.array_equal(py.class_scores(X), cy.class_scores(X))
    for i in range(8):
        for training in (False, True):
            assert np.array_equal(
                py.clause_outputs(0, X[i], training=training),
                cy.clause_outputs(0, X[i], training=training),
            )
    assert np.array_equal(py.predict(X), cy.predict(X))


def test_serialized_models_are_byte_identical_across_backends():
    rs = np.random.RandomState(6)
    X, y = random_problem(rs, 100, 5, 3)
    cfg = TMConfig(num_features=5, num_classes=3, clauses_per_class=6,
                   threshold=4, seed=21)
    py, cy = paired(cfg)
    py.fit(X, y, epochs=3)
    cy.fit(X, y, epochs=3)
    assert py.to_bytes() == cy.to_bytes()


def test_env_var_selects_backend(monkeypatch):
    monkeypatch.setenv("TMREC_BACKEND", "python")
    assert get_kernel().BACKEND_NAME == "python"
    monkeypatch.setenv("TMREC_BACKEND", "cython")
    assert get_kernel().BACKEND_NAME == "cython"
    monkeypatch.setenv("TMREC_BACKEND", "nonsense")
    with pytest.raises(BackendUnavailable):
        get_kernel()


def test_explicit_name_overrides_env(monkeypatch):
    monkeypatch.setenv("TMREC_BACKEND", "python")
    assert get_kernel("cython").BACKEND_NAME == "cython"
