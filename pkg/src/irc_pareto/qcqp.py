"""Homogeneous QCQP forms of the Pareto-boundary subproblems.

General relay: the variable is ``v = t [vec(R); 1]`` (dimension M^2 + 1),
so every SINR is a ratio of Hermitian forms in ``v`` and the power budget
is ``v^H X3 v <= 0``.  With IN the variable is ``y = t [vec(S); 1]``
(dimension K^2 + 1) plus the neutralization constraint
``y^H D4 y == 0``, which is removed by restricting ``y`` to the null
space of ``D4`` (``y = V0 x``, dimension K + 1).

User indices are 0-based; ``targets[k]`` is the SINR target of user k + 1.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import linalg
from .channel import relay_q
from .neutralization import _require_square, q_tilde, relay_from_s, rt_gram
from .sdp import HermitianSdp

NULL_TOL = 1e-8


class DegenerateRecoveryError(ValueError):
    pass


@dataclass(frozen=True)
class QcqpInstance:
    kind: str  # "general" or "in"
    K: int
    M: int
    user: int
    objective_num: np.ndarray
    objective_den: np.ndarray
    sinr_constraints: list  # [(user, gamma, B_user - gamma * D_user)]
    power_constraint: np.ndarray
    in_constraint: Optional[np.ndarray] = None
    projection: Optional[np.ndarray] = None
    p: np.ndarray = field(default=None)
    p_r_max: float = 0.0

    @property
    def dim(self):
        return self.objective_num.shape[0]

    def matrices(self):
        mats = [self.objective_num, self.objective_den, self.power_constraint]
        mats += [m for _, _, m in self.sinr_constraints]
        if self.in_constraint is not None:
            mats.append(self.in_constraint)
        return mats

    def to_sdp(self):
        """Relaxation: ``v v^H -> X``, rank constraint dropped."""
        cons = [(self.objective_den, "==", 1.0)]
        cons += [(m, ">=", 0.0) for _, _, m in self.sinr_constraints]
        cons.append((self.power_constraint, "<=", 0.0))
        if self.in_constraint is not None:
            cons.append((self.in_constraint, "==", 0.0))
        return HermitianSdp(self.objective_num, cons)

    def lift(self, x):
        """Vector in the unprojected coordinates."""
        x = np.asarray(x)
        return x if self.projection is None else self.projection @ x

    def evaluate(self, x):
        """Objective ratio and raw constraint values at ``x``."""
        x = np.asarray(x)
        q = lambda A: float(np.real(np.vdot(x, A @ x)))
        den = q(self.objective_den)
        return {
            "objective": q(self.objective_num) / den if den > 0 else np.inf,
            "sinr_margins": [q(m) for _, _, m in self.sinr_constraints],
            "power": q(self.power_constraint),
            "in": None if self.in_constraint is None else q(self.in_constraint),
        }

    def to_dict(self):
        enc = lambda a: None if a is None else [
            [[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(a)
        ]
        return {
            "kind": self.kind,
            "K": self.K,
            "M": self.M,
            "user": self.user,
            "dim": self.dim,
            "p": None if self.p is None else [float(v) for v in self.p],
            "p_r_max": float(self.p_r_max),
            "objective_num": enc(self.objective_num),
            "objective_den": enc(self.objective_den),
            "sinr_constraints": [
                {"user": u, "gamma": float(g), "matrix": enc(m)}
                for u, g, m in self.sinr_constraints
            ],
            "power_constraint": enc(self.power_constraint),
            "in_constraint": enc(self.in_constraint),
            "projection": enc(self.projection),
        }


def _outer(c):
    """``conj(c) c^T``, so that ``v^H (conj(c) c^T) v == |c^T v|^2``."""
    return np.outer(c.conj(), c)


def _block(top_left, corner):
    n = top_left.shape[0]
    out = np.zeros((n + 1, n + 1), dtype=complex)
    out[:n, :n] = top_left
    out[n, n] = corner
    return out


def _check_targets(K, targets):
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if targets.shape != (K - 1,):
        raise ValueError(f"expected {K - 1} SINR targets, got {targets.shape}")
    if np.any(targets < 0):
        raise ValueError("SINR targets must be nonnegative")
    return targets


def general_gain_vector(ch, i, l):
    """``c`` with ``c^T [vec(R); 1] == h_il + g_ir^H R g_rl``."""
    a = np.kron(ch.G_rt[:, l], ch.G_dr[:, i].conj())
    return np.append(a, ch.H[i, l])


def general_signal(ch, p, i):
    return p[i] * _outer(general_gain_vector(ch, i, i))


def general_interference_noise(ch, p, i, interference=True):
    M = ch.M
    g = ch.G_dr[:, i]
    out = _block(np.kron(np.eye(M), np.outer(g, g.conj())), 1.0)
    if interference:
        for l in range(ch.K):
            if l != i:
                out += p[l] * _outer(general_gain_vector(ch, i, l))
    return out


def general_power(ch, p, p_r_max):
    return _block(np.kron(relay_q(ch, p).T, np.eye(ch.M)), -float(p_r_max))


def build_general(ch, p, targets, p_r_max):
    """Pareto-boundary subproblem for an unconstrained relay matrix."""
    p = np.asarray(p, dtype=float)
    targets = _check_targets(ch.K, targets)
    cons = []
    for j in range(1, ch.K):
        g = targets[j - 1]
        m = general_signal(ch, p, j) - g * general_interference_noise(ch, p, j)
        cons.append((j, float(g), linalg.hermitize(m)))
    return QcqpInstance(
        kind="general",
        K=ch.K,
        M=ch.M,
        user=0,
        objective_num=linalg.hermitize(general_signal(ch, p, 0)),
        objective_den=linalg.hermitize(general_interference_noise(ch, p, 0)),
        sinr_constraints=cons,
        power_constraint=general_power(ch, p, p_r_max),
        p=p,
        p_r_max=float(p_r_max),
    )


def build_single_user_general(ch, p, p_r_max, j):
    """User ``j`` alone: interference terms dropped, only the power budget."""
    p = np.asarray(p, dtype=float)
    return QcqpInstance(
        kind="general",
        K=ch.K,
        M=ch.M,
        user=j,
        objective_num=linalg.hermitize(general_signal(ch, p, j)),
        objective_den=linalg.hermitize(general_interference_noise(ch, p, j, False)),
        sinr_constraints=[],
        power_constraint=general_power(ch, p, p_r_max),
        p=p,
        p_r_max=float(p_r_max),
    )


def in_signal(ch, p, i):
    """``P_i |h_ii + s_i|^2`` as a form in ``[vec(S); 1]``."""
    _, L = linalg.selection_matrices(ch.K)
    c = np.append(L[i].astype(complex), ch.H[i, i])
    return p[i] * _outer(c)


def in_noise(ch, i):
    """``||g_ir^H R(S)||^2 + 1`` as a form in ``[vec(S); 1]``."""
    e = np.zeros((ch.K, ch.K))
    e[i, i] = 1.0
    return _block(np.kron(rt_gram(ch), e), 1.0)


def in_power(ch, p, p_r_max):
    return _block(q_tilde(ch, p), -float(p_r_max))


def in_structure(ch):
    """PSD form vanishing exactly on ``T vec(S) == -T vec(H)`` (homogenized)."""
    T, _ = linalg.selection_matrices(ch.K)
    A = np.hstack([T, (T @ linalg.vec(ch.H))[:, None]]).astype(complex)
    return linalg.hermitize(A.conj().T @ A)


def _in_instance(ch, p, p_r_max, user, cons, objective_den):
    return QcqpInstance(
        kind="in",
        K=ch.K,
        M=ch.M,
        user=user,
        objective_num=linalg.hermitize(in_signal(ch, p, user)),
        objective_den=linalg.hermitize(objective_den),
        sinr_constraints=cons,
        power_constraint=linalg.hermitize(in_power(ch, p, p_r_max)),
        in_constraint=in_structure(ch),
        p=p,
        p_r_max=float(p_r_max),
    )


def build_in(ch, p, targets, p_r_max):
    """Pareto-boundary subproblem restricted to neutralizing relays."""
    _require_square(ch)
    p = np.asarray(p, dtype=float)
    targets = _check_targets(ch.K, targets)
    cons = []
    for j in range(1, ch.K):
        g = targets[j - 1]
        m = in_signal(ch, p, j) - g * in_noise(ch, j)
        cons.append((j, float(g), linalg.hermitize(m)))
    return _in_instance(ch, p, p_r_max, 0, cons, in_noise(ch, 0))


def build_single_user_in(ch, p, p_r_max, j):
    _require_square(ch)
    p = np.asarray(p, dtype=float)
    return _in_instance(ch, p, p_r_max, j, [], in_noise(ch, j))


def project_null(inst, tol=NULL_TOL):
    """Restrict an IN instance to the null space of its structure form."""
    if inst.in_constraint is None:
        raise ValueError("instance has no IN constraint to project out")
    K = inst.K
    w, U = linalg.herm_eig(inst.in_constraint)
    expected = K * K - K
    rank = int(np.sum(w > tol * max(w[0], 1.0)))
    if rank != expected:
        raise ValueError(f"IN structure form has rank {rank}, expected {expected}")
    V0 = U[:, rank:]
    proj = lambda A: linalg.hermitize(V0.conj().T @ A @ V0)
    return replace(
        inst,
        objective_num=proj(inst.objective_num),
        objective_den=proj(inst.objective_den),
        sinr_constraints=[(u, g, proj(m)) for u, g, m in inst.sinr_constraints],
        power_constraint=proj(inst.power_constraint),
        in_constraint=None,
        projection=V0,
    )


def homogenize(mat):
    """``[vec(mat); 1]``, the lifted vector of a relay (or S) matrix."""
    return np.append(linalg.vec(mat).astype(complex), 1.0)


def recover_relay(solution, inst, ch, tol=1e-9):
    """Relay matrix from a (possibly projected) homogenized vector."""
    y = inst.lift(solution)
    t = y[-1]
    if abs(t) <= tol * np.linalg.norm(y):
        raise DegenerateRecoveryError("Charnes-Cooper recovery degenerate: t ~ 0")
    body = linalg.unvec(y[:-1] / t, inst.M if inst.kind == "general" else inst.K)
    if inst.kind == "general":
        return body
    return relay_from_s(ch, body)
