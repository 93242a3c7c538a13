"""Pure NumPy kernels: the fallback backend.

Semantics contract shared with the compiled backend (`_kernel_cy`):

* Automaton state layout is ``(classes, clauses, 2 * features)`` int16.
  Literal ``l < F`` is feature ``l`` itself, literal ``l >= F`` is the
  negation of feature ``l - F``.  State > ``n_states`` means included.
* Clause with even index votes for the class, odd index against.
* Random draws come from the counter-based streams in `tmrec.rng`.
  Per training example, in order: one draw from the selector stream
  (stream id = num_classes) to pick the negative class, then per touched
  bank (target first): ``clauses`` coin draws in clause index order,
  then ``2 * features`` draws per coin-selected clause that receives
  reinforcement feedback, again in clause index order.  The penalty
  feedback path consumes no draws.

Any change to this consumption order breaks cross-backend parity.
"""

from __future__ import annotations

import numpy as np

from ..rng import uniform_block

BACKEND_NAME = "python"


def clause_outputs(bank: np.ndarray, n_states: int, x: np.ndarray, training: bool) -> np.ndarray:
    """Per-clause 0/1 outputs of one class bank for a single input."""
    F = x.shape[0]
    lit = np.empty(2 * F, dtype=np.bool_)
    lit[:F] = x == 1
    lit[F:] = x == 0
    include = bank > n_states
    nonempty = include.any(axis=1)
    satisfied = ~(include & ~lit[None, :]).any(axis=1)
    if training:
        return np.where(nonempty, satisfied, True).astype(np.uint8)
    return (nonempty & satisfied).astype(np.uint8)


def class_scores_batch(states: np.ndarray, n_states: int, X: np.ndarray) -> np.ndarray:
    """Inference-mode vote sums, shape (examples, classes), dtype int32."""
    K, C, L = states.shape
    F = L // 2
    include = (states > n_states).reshape(K * C, L)
    nonempty = include.any(axis=1)
    inc_f = include.astype(np.float32)
    weights = np.where(np.arange(C) % 2 == 0, 1, -1).astype(np.int32)

    n = X.shape[0]
    scores = np.empty((n, K), dtype=np.int32)
    chunk = max(1, int(8_000_000 // max(1, K * C)))
    for lo in range(0, n, chunk):
        xb = X[lo : lo + chunk]
        lit = np.empty((xb.shape[0], L), dtype=np.float32)
        lit[:, :F] = xb
        lit[:, F:] = 1 - xb
        # count of included-but-unsatisfied literals; exact in float32 for
        # any realistic literal count
        unsat = inc_f @ (1.0 - lit.T)
        fired = (unsat < 0.5) & nonempty[:, None]
        per_class = fired.reshape(K, C, -1).astype(np.int32)
        scores[lo : lo + chunk] = np.einsum("kcb,c->bk", per_class, weights)
    return scores


def _update_bank(
    bank: np.ndarray,
    lit: np.ndarray,
    is_target: bool,
    threshold: int,
    p_low: float,
    p_high: float,
    n_states: int,
    pol_pos: np.ndarray,
    seed: int,
    counter: int,
) -> tuple[int, int, int]:
    """Apply one example's feedback to one class bank.

    Returns (new stream counter, reinforcement events, penalty events).
    """
    C, L = bank.shape
    include = bank > n_states
    nonempty = include.any(axis=1)
    satisfied = ~(include & ~lit[None, :]).any(axis=1)
    out = np.where(nonempty, satisfied, True)  # training-mode outputs

    votes = int(out[pol_pos].sum()) - int(out[~pol_pos].sum())
    v = min(threshold, max(-threshold, votes))
    if is_target:
        p = (threshold - v) / (2.0 * threshold)
    else:
        p = (threshold + v) / (2.0 * threshold)

    coins = uniform_block(seed, counter, C)
    counter += C
    selected = coins < p
    reinforce = selected & (pol_pos if is_target else ~pol_pos)
    penalize = selected & (~pol_pos if is_target else pol_pos)

    # Penalty: firing clauses get every excluded false literal nudged one
    # step toward inclusion.  Deterministic, no draws.
    pen_rows = np.flatnonzero(penalize & out)
    if pen_rows.size:
        sub = bank[pen_rows]
        sub[(~lit)[None, :] & (sub <= n_states)] += 1
        bank[pen_rows] = sub

    # Reinforcement: consumes 2F draws per selected clause, literal order.
    rows = np.flatnonzero(reinforce)
    if rows.size:
        U = uniform_block(seed, counter, rows.size * L).reshape(rows.size, L)
        counter += rows.size * L
        sub = bank[rows]
        fired = out[rows][:, None]
        litm = lit[None, :]
        inc = fired & litm & (U < p_high) & (sub < 2 * n_states)
        dec = ((fired & ~litm) | ~fired) & (U < p_low) & (sub > 1)
        sub[inc] += 1
        sub[dec] -= 1
        bank[rows] = sub

    return counter, int(rows.size), int(pen_rows.size)


def train_epoch(
    states: np.ndarray,
    n_states: int,
    X: np.ndarray,
    y: np.ndarray,
    threshold: int,
    specificity: float,
    seeds: np.ndarray,
    counters: np.ndarray,
) -> tuple[int, int]:
    """One in-order pass over (X, y); mutates states and counters in place.

    Returns (reinforcement events, penalty events), counted per clause.
    """
    K, C, L = states.shape
    F = L // 2
    p_low = 1.0 / specificity
    p_high = (specificity - 1.0) / specificity
    pol_pos = (np.arange(C) % 2) == 0
    type_i = 0
    type_ii = 0

    lit = np.empty(L, dtype=np.bool_)
    for n in range(X.shape[0]):
        x = X[n]
        lit[:F] = x == 1
        lit[F:] = x == 0
        target = int(y[n])

        ctr, ev1, ev2 = _update_bank(
            states[target], lit, True, threshold, p_low, p_high,
            n_states, pol_pos, int(seeds[target]), int(counters[target]),
        )
        counters[target] = ctr
        type_i += ev1
        type_ii += ev2

        if K >= 2:
            u = uniform_block(int(seeds[K]), int(counters[K]), 1)[0]
            counters[K] += 1
            neg = int(u * (K - 1))
            if neg >= K - 1:
                neg = K - 2
            if neg >= target:
                neg += 1
            ctr, ev1, ev2 = _update_bank(
                states[neg], lit, False, threshold, p_low, p_high,
                n_states, pol_pos, int(seeds[neg]), int(counters[neg]),
            )
            counters[neg] = ctr
            type_i += ev1
            type_ii += ev2

    return type_i, type_ii
