"""Stochastic shortest path over the synchronous product of k copies of an MDP.

The joint transition function factorises, ``P'(s, a, t) = prod_i P(s_i, a_i, t_i)``,
so a Bellman backup over the product is a sequence of k tensor contractions
with the single-agent tensor ``P[a, s, t]``.  Joint states and joint actions
are flattened in C order over ``(n_states,) * k`` and ``(n_actions,) * k``.
With ``k = 1`` this is the ordinary single-agent SSP solver.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .chains import hitting_times

IMPROVE_TOL = 1e-12
MAX_POLICY_ITERATIONS = 10_000


class ProductTooLarge(RuntimeError):
    """The requested product exceeds the configured size guard."""


class FactoredSsp:
    def __init__(self, P: np.ndarray, enabled: np.ndarray, targets: list[np.ndarray],
                 state_cap: int | None = None, choice_cap: int | None = None):
        self.P = np.asarray(P, dtype=float)
        self.A, self.S, _ = self.P.shape
        self.k = len(targets)
        self.N = self.S ** self.k
        self.M = self.A ** self.k
        if state_cap is not None and self.N > state_cap:
            raise ProductTooLarge(
                f"product too large: {self.S}^{self.k} = {self.N} states exceeds cap {state_cap}")
        if choice_cap is not None and self.N * self.M > choice_cap:
            raise ProductTooLarge(
                f"product too large: {self.N} states x {self.M} joint actions exceeds "
                f"choice cap {choice_cap}")
        self.support = (self.P > 0).astype(float)

        tshape = (self.S,) * self.k
        joint_t = np.zeros(tshape, dtype=bool)
        for i, tm in enumerate(targets):
            shape = [1] * self.k
            shape[i] = self.S
            joint_t = joint_t | np.asarray(tm, dtype=bool).reshape(shape)
        self.targets = joint_t.reshape(-1)

        en = np.asarray(enabled, dtype=bool)
        joint_en = np.ones((1, 1), dtype=bool)
        for _ in range(self.k):
            joint_en = (joint_en[:, None, :, None] & en[None, :, None, :]).reshape(
                joint_en.shape[0] * self.S, joint_en.shape[1] * self.A)
        self.enabled = joint_en

        m = max(1, int((self.P > 0).sum(axis=2).max()))
        order = np.argsort(-self.P, axis=2, kind="stable")[:, :, :m]
        self.succ_idx = order
        self.succ_p = np.take_along_axis(self.P, order, axis=2)

    def backup(self, y: np.ndarray, tensor: np.ndarray | None = None) -> np.ndarray:
        """``Q[s, a] = sum_t prod_i T[a_i, s_i, t_i] * y[t]`` as an ``(N, M)`` array."""
        T = self.P if tensor is None else tensor
        res = np.asarray(y, dtype=float).reshape((self.S,) * self.k)
        for _ in range(self.k):
            res = np.tensordot(res, T, axes=([0], [2]))
        # axes are now (a_1, s_1, ..., a_k, s_k)
        perm = [2 * i + 1 for i in range(self.k)] + [2 * i for i in range(self.k)]
        return np.ascontiguousarray(res.transpose(perm)).reshape(self.N, self.M)

    def _leaks(self, inside: np.ndarray) -> np.ndarray:
        return self.backup((~inside).astype(float), self.support) > 0.5

    def core(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Greatest set from which the targets can be reached almost surely.

        Returns ``(core, safe, attractor)``: ``safe[s, a]`` marks enabled joint
        actions whose whole support stays in the core, ``attractor`` a proper
        safe action for every non-target core state (``-1`` elsewhere).
        """
        C = np.ones(self.N, dtype=bool)
        while True:
            safe = self.enabled & ~self._leaks(C)
            R = self.targets.copy()
            attractor = np.full(self.N, -1, dtype=np.int64)
            while True:
                hits = safe & (self.backup(R.astype(float), self.support) > 0.5)
                new = C & ~R & hits.any(axis=1)
                if not new.any():
                    break
                idx = np.flatnonzero(new)
                attractor[idx] = np.argmax(hits[idx], axis=1)
                R |= new
            if np.array_equal(R, C):
                return C, safe, attractor
            C = R

    def policy_matrix(self, rows: np.ndarray, actions: np.ndarray) -> sp.csr_matrix:
        """Rows of the joint chain for deterministic joint actions, shape ``(len(rows), N)``."""
        k, S, m = self.k, self.S, self.succ_idx.shape[2]
        n = len(rows)
        s_comp = np.unravel_index(rows, (S,) * k)
        a_comp = np.unravel_index(actions, (self.A,) * k)
        idx = np.zeros((n,) + (1,) * k, dtype=np.int64)
        prob = np.ones((n,) + (1,) * k)
        for i in range(k):
            shape = [n] + [1] * k
            shape[1 + i] = m
            idx = idx + self.succ_idx[a_comp[i], s_comp[i]].reshape(shape) * S ** (k - 1 - i)
            prob = prob * self.succ_p[a_comp[i], s_comp[i]].reshape(shape)
        idx = np.broadcast_to(idx, (n,) + (m,) * k).reshape(n, m ** k)
        prob = np.broadcast_to(prob, (n,) + (m,) * k).reshape(n, m ** k)
        r = np.repeat(np.arange(n), idx.shape[1])
        keep = prob.reshape(-1) > 0
        return sp.csr_matrix(
            (prob.reshape(-1)[keep], (r[keep], idx.reshape(-1)[keep])), shape=(n, self.N))

    def chain(self, policy: np.ndarray, rows: np.ndarray) -> sp.csr_matrix:
        """Joint chain over all N states; rows not in ``rows`` are self-loops."""
        part = self.policy_matrix(rows, policy[rows]).tocoo()
        others = np.setdiff1d(np.arange(self.N), rows)
        data = np.concatenate([part.data, np.ones(len(others))])
        r = np.concatenate([rows[part.row], others])
        c = np.concatenate([part.col, others])
        return sp.csr_matrix((data, (r, c)), shape=(self.N, self.N))

    def evaluate(self, policy: np.ndarray, rows: np.ndarray) -> np.ndarray:
        times, _ = hitting_times(self.chain(policy, rows), self.targets)
        return times

    def solve(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Policy iteration from the attractor policy.

        Returns ``(values, policy, core)``; values are ``inf`` outside the
        core and policy entries are ``-1`` on targets and outside the core.
        """
        C, safe, attractor = self.core()
        rows = np.flatnonzero(C & ~self.targets)
        policy = attractor.copy()
        for _ in range(MAX_POLICY_ITERATIONS):
            y = self.evaluate(policy, rows)
            best, greedy = self._greedy(y, safe, rows)
            current = self._q_rows(y, rows, policy[rows])
            if not np.any(best < current - IMPROVE_TOL):
                break
            better = best < current - IMPROVE_TOL
            policy[rows[better]] = greedy[better]
        else:  # pragma: no cover
            raise RuntimeError("policy iteration did not converge")
        policy = np.full(self.N, -1, dtype=np.int64)
        policy[rows] = greedy
        values = self.evaluate(policy, rows)
        values[~C] = np.inf
        return values, policy, C

    def _q(self, y: np.ndarray, safe: np.ndarray) -> np.ndarray:
        yy = np.where(np.isfinite(y), y, 0.0)
        Q = 1.0 + self.backup(yy)
        Q[~safe] = np.inf
        return Q

    def _q_rows(self, y, rows, actions):
        yy = np.where(np.isfinite(y), y, 0.0)
        return 1.0 + self.policy_matrix(rows, actions) @ yy

    def _greedy(self, y, safe, rows):
        Q = self._q(y, safe)[rows]
        best = Q.min(axis=1) if len(rows) else np.zeros(0)
        # smallest action index among the (near-)minimisers
        greedy = np.argmax(Q <= best[:, None] + IMPROVE_TOL, axis=1) if len(rows) else \
            np.zeros(0, dtype=np.int64)
        return best, greedy
