"""Antenna-to-UE association: greedy (AGA), nearest-UE (NUA) and an exhaustive oracle.

An association is an integer array ``a`` of shape (L, U, K) with
``a[l, u, k] == 1`` when antenna u of AP l streams to UE k.
"""

from __future__ import annotations

import itertools

import numpy as np

from .scenario import Layout


class InfeasibleAssociation(ValueError):
    pass


class InsufficientAntennas(ValueError):
    pass


def distance_tensor(layout: Layout) -> np.ndarray:
    """Antenna-to-UE distances d[l, u, k] in metres."""
    ant = layout.antenna_positions
    return np.linalg.norm(ant[:, :, None, :] - layout.ue_positions[None, None, :, :], axis=-1)


def check_feasible(A: np.ndarray) -> None:
    A = np.asarray(A)
    if A.ndim != 3:
        raise InfeasibleAssociation(f"expected an (L, U, K) array, got shape {A.shape}")
    if not np.isin(A, (0, 1)).all():
        raise InfeasibleAssociation("entries must be 0 or 1")
    rows = A.sum(axis=2)
    if not (rows == 1).all():
        l, u = np.argwhere(rows != 1)[0]
        raise InfeasibleAssociation(f"antenna {u} of AP {l} serves {rows[l, u]} UEs, expected exactly 1")
    cover = A.sum(axis=(0, 1))
    if not (cover >= 1).all():
        raise InfeasibleAssociation(f"UE {int(np.argmin(cover))} has no serving antenna")


def is_feasible(A: np.ndarray) -> bool:
    try:
        check_feasible(A)
    except InfeasibleAssociation:
        return False
    return True


def association_cost(A: np.ndarray, D: np.ndarray) -> float:
    check_feasible(A)
    return float(np.sum(A * D))


def _require_antennas(D: np.ndarray) -> None:
    L, U, K = D.shape
    if L * U < K:
        raise InsufficientAntennas(f"{L * U} antennas cannot cover {K} UEs")


def aga(D: np.ndarray) -> np.ndarray:
    """AP antenna greedy association.

    Phase 1 covers every UE once: repeatedly take the closest (AP, UE) pair
    among APs with a free antenna and UEs not yet covered, and bind the
    lowest-index free antenna. Phase 2 hands each AP's leftover antennas to
    its nearest UEs in distance order.
    """
    D = np.asarray(D, dtype=float)
    _require_antennas(D)
    L, U, K = D.shape
    A = np.zeros((L, U, K), dtype=int)
    d_ap = D.min(axis=1)  # (L, K)
    free = np.full((L, U), True)
    covered = np.zeros(K, dtype=bool)

    for _ in range(K):
        masked = np.where(free.any(axis=1)[:, None] & ~covered[None, :], d_ap, np.inf)
        # argmin over the flattened (l, k) grid breaks ties on the lowest index
        l, k = np.unravel_index(np.argmin(masked), masked.shape)
        u = int(np.flatnonzero(free[l])[0])
        A[l, u, k] = 1
        free[l, u] = False
        covered[k] = True

    for l in range(L):
        idle = np.flatnonzero(free[l])
        if idle.size == 0:
            continue
        ranked = np.argsort(d_ap[l], kind="stable")
        # more idle antennas than UEs: keep cycling down the ranking
        for i, u in enumerate(idle):
            A[l, u, ranked[i % K]] = 1
            free[l, u] = False
    return A


def nua(D: np.ndarray) -> np.ndarray:
    """Nearest-UE association with a coverage repair pass.

    Each antenna picks its nearest UE. Then, for each uncovered UE in index
    order, the nearest antenna whose current UE is also served by another
    antenna is moved over to it.
    """
    D = np.asarray(D, dtype=float)
    _require_antennas(D)
    L, U, K = D.shape
    choice = np.argmin(D, axis=2)  # (L, U)
    for k in range(K):
        counts = np.bincount(choice.ravel(), minlength=K)
        if counts[k] > 0:
            continue
        movable = counts[choice] >= 2
        cand = np.where(movable, D[:, :, k], np.inf)
        l, u = np.unravel_index(np.argmin(cand), cand.shape)
        choice[l, u] = k
    return _one_hot(choice, K)


def _one_hot(choice: np.ndarray, K: int) -> np.ndarray:
    return (choice[..., None] == np.arange(K)).astype(int)


def brute_force_assoc(D: np.ndarray, limit: int = 10**6):
    """Exhaustive minimum-cost feasible association.

    Returns ``(A, cost)``. Among equal-cost optima the one whose flattened
    matrix is lexicographically smallest is returned.
    """
    D = np.asarray(D, dtype=float)
    L, U, K = D.shape
    n_ant = L * U
    if K**n_ant > limit:
        raise ValueError(f"instance too large: {K}^{n_ant} assignments exceeds {limit}")
    _require_antennas(D)
    flat = D.reshape(n_ant, K)
    choices = np.array(list(itertools.product(range(K), repeat=n_ant)), dtype=np.int64)
    costs = flat[np.arange(n_ant)[None, :], choices].sum(axis=1)
    covered = np.ones(len(choices), dtype=bool)
    for k in range(K):
        covered &= (choices == k).any(axis=1)
    costs = np.where(covered, costs, np.inf)
    best = np.flatnonzero(costs == costs.min())
    # a one-hot row is lexicographically smaller when its 1 sits further
    # right, so the smallest flattening is the largest choice vector
    pick = max(best, key=lambda i: tuple(choices[i]))
    A = _one_hot(choices[pick].reshape(L, U), K)
    return A, float(costs[pick])
