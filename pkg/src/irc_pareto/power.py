"""Pareto-optimal source powers for a fixed relay matrix.

With ``R`` fixed, the relay power is affine in the source powers,
``tr(R R^H) + sum_l ||R g_rl||^2 p_l``, so the boundary subproblem is a
one-parameter problem: the SINR constraints of users 2..K hold with
equality, which fixes ``p_{2:K}`` as an affine function of ``p_1``, and
``sinr_1`` is increasing in ``p_1`` along that line.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from .channel import relay_power, satisfies_in, sinrs, sinr_in, INResidualError

COND_LIMIT = 1e10
VERIFY_TOL = 1e-9


class SingularPowerSystemError(ValueError):
    pass


@dataclass
class PowerSolution:
    p: np.ndarray
    achieved_sinr1: float
    active_flags: dict = field(default_factory=dict)
    feasible: bool = False
    clamped: bool = False

    def to_dict(self):
        return {
            "p": [float(v) for v in self.p],
            "achieved_sinr1": float(self.achieved_sinr1),
            "active_flags": dict(self.active_flags),
            "feasible": bool(self.feasible),
            "clamped": bool(self.clamped),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            p=np.asarray(d["p"], dtype=float),
            achieved_sinr1=float(d["achieved_sinr1"]),
            active_flags=dict(d.get("active_flags", {})),
            feasible=bool(d["feasible"]),
            clamped=bool(d.get("clamped", False)),
        )

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _relay_terms(ch, R):
    """``tr(R R^H)`` and ``||R g_rl||^2`` for every source l."""
    R = np.asarray(R, dtype=complex)
    base = float(np.real(np.sum(np.abs(R) ** 2)))
    per_source = np.sum(np.abs(R @ ch.G_rt) ** 2, axis=0)
    return base, per_source


def sinr_system(ch, R, targets):
    """``A`` ((K-1) x K) and ``q`` with ``A p >= q`` equivalent to the SINR targets."""
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    K = ch.K
    if targets.shape != (K - 1,):
        raise ValueError(f"expected {K - 1} SINR targets, got {targets.shape}")
    if np.any(targets < 0):
        raise ValueError("SINR targets must be nonnegative")
    E = np.abs(ch.effective_gains(R)) ** 2
    noise = np.sum(np.abs(ch.G_dr.conj().T @ np.asarray(R)) ** 2, axis=1) + 1.0
    A = np.zeros((K - 1, K))
    q = np.zeros(K - 1)
    for m in range(K - 1):
        j = m + 1
        A[m] = -targets[m] * E[j]
        A[m, j] = E[j, j]
        q[m] = targets[m] * noise[j]
    return A, q


def _verify(ch, R, p, targets, p_s_max, p_r_max, use_in):
    if np.any(p < -VERIFY_TOL * max(1.0, p_s_max)) or np.any(p > p_s_max * (1 + VERIFY_TOL)):
        return False
    if relay_power(ch, p, R) > p_r_max + VERIFY_TOL * max(1.0, p_r_max):
        return False
    if use_in:
        s = np.array([sinr_in(ch, p, R, j, tol=np.inf) for j in range(ch.K)])
    else:
        s = sinrs(ch, p, R)
    return bool(np.all(s[1:] >= np.asarray(targets) * (1 - VERIFY_TOL) - VERIFY_TOL))


def _infeasible(K, flags):
    return PowerSolution(np.zeros(K), 0.0, flags, feasible=False)


def optimal_power_general(ch, R, targets, p_s_max, p_r_max):
    """Maximize ``sinr_1`` over source powers for a fixed relay matrix.

    Along the line where every SINR constraint is tight,
    ``p_{2:K} = alpha + beta p_1`` with ``alpha = A2^{-1} q`` and
    ``beta = -A2^{-1} a_1``.  Each remaining constraint (source caps,
    nonnegativity, relay budget) is affine in ``p_1``; ``p_1`` is the
    largest value that satisfies all of them, and ``active_flags`` names the
    bound that stopped it.
    """
    K = ch.K
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    A, q = sinr_system(ch, R, targets)
    A2 = A[:, 1:]
    cond = np.linalg.cond(A2)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularPowerSystemError(f"SINR system is singular (cond={cond:.3e})")
    alpha = np.linalg.solve(A2, q)
    beta = -np.linalg.solve(A2, A[:, 0])
    base, c = _relay_terms(ch, R)

    # constraints written as  coef * p1 <= rhs
    rows = [(1.0, p_s_max, "p_s_max"), (-1.0, 0.0, "p1_nonneg")]
    for k in range(K - 1):
        rows.append((beta[k], p_s_max - alpha[k], f"p{k + 2}_max"))
        rows.append((-beta[k], alpha[k], f"p{k + 2}_nonneg"))
    rows.append((c[0] + c[1:] @ beta, p_r_max - base - c[1:] @ alpha, "relay"))

    lo, hi, hi_flag = 0.0, np.inf, None
    for coef, rhs, name in rows:
        scale = max(1.0, abs(rhs))
        if abs(coef) <= 1e-14 * scale:
            if rhs < -VERIFY_TOL * scale:
                return _infeasible(K, {"violated": name})
            continue
        bound = rhs / coef
        if coef > 0 and bound < hi:
            hi, hi_flag = bound, name
        elif coef < 0 and bound > lo:
            lo = bound
    if hi < lo - VERIFY_TOL * max(1.0, abs(hi)):
        return _infeasible(K, {"empty_interval": [float(lo), float(hi)]})

    p1 = float(np.clip(hi, 0.0, p_s_max))
    p = np.concatenate([[p1], np.clip(alpha + beta * p1, 0.0, p_s_max)])
    flags = {name: name == hi_flag for _, _, name in rows if not name.endswith("_nonneg")}
    # a source cap of users 2..K stopped p_1: the formula's clamp case
    clamped = hi_flag is not None and hi_flag.endswith("_max") and hi_flag != "p_s_max"
    if not _verify(ch, R, p, targets, p_s_max, p_r_max, use_in=False):
        return PowerSolution(p, 0.0, flags, feasible=False, clamped=clamped)
    return PowerSolution(p, float(sinrs(ch, p, R)[0]), flags, feasible=True, clamped=clamped)


def optimal_power_in(ch, R, targets, p_s_max, p_r_max):
    """Closed-form powers when ``R`` neutralizes all interference.

    Users 2..K get exactly the power that meets their target; user 1 takes
    what is left of the relay budget, capped at ``p_s_max``.
    """
    if not satisfies_in(ch, R):
        raise INResidualError("relay matrix does not neutralize interference")
    K = ch.K
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if targets.shape != (K - 1,) or np.any(targets < 0):
        raise ValueError(f"expected {K - 1} nonnegative SINR targets")
    E = ch.effective_gains(R)
    noise = np.sum(np.abs(ch.G_dr.conj().T @ np.asarray(R)) ** 2, axis=1) + 1.0
    base, c = _relay_terms(ch, R)

    u = np.zeros(K)
    for j in range(1, K):
        gain = abs(E[j, j]) ** 2
        need = np.inf if gain == 0 and targets[j - 1] > 0 else (
            0.0 if targets[j - 1] == 0 else targets[j - 1] * noise[j] / gain)
        if need > p_s_max * (1 + VERIFY_TOL):
            return _infeasible(K, {f"p{j + 1}_max": True})
        u[j] = min(need, p_s_max)
    left = p_r_max - base - c[1:] @ u[1:]
    if c[0] > 0:
        relay_cap = left / c[0]
    else:
        relay_cap = np.inf if left >= -VERIFY_TOL * max(1.0, p_r_max) else -np.inf
    flags = {"p_s_max": bool(p_s_max <= relay_cap), "relay": bool(relay_cap < p_s_max)}
    if relay_cap < -VERIFY_TOL * max(1.0, p_s_max):
        return _infeasible(K, {"relay": True})
    u[0] = float(np.clip(relay_cap, 0.0, p_s_max))
    if not _verify(ch, R, u, targets, p_s_max, p_r_max, use_in=True):
        return PowerSolution(u, 0.0, flags, feasible=False)
    return PowerSolution(u, sinr_in(ch, u, R, 0), flags, feasible=True)


def brute_force_power(ch, R, targets, p_s_max, p_r_max, grid_n=200, use_in=False):
    """Best grid point of ``[0, p_s_max]^2`` for the same problem (K = 2 only)."""
    if ch.K != 2:
        raise ValueError("the grid oracle is limited to K = 2")
    gamma2 = float(np.atleast_1d(targets)[0])
    axis = np.linspace(0.0, p_s_max, grid_n)
    P1, P2 = np.meshgrid(axis, axis, indexing="ij")
    E = np.abs(ch.effective_gains(R)) ** 2
    noise = np.sum(np.abs(ch.G_dr.conj().T @ np.asarray(R)) ** 2, axis=1) + 1.0
    base, c = _relay_terms(ch, R)
    if use_in:
        s1 = E[0, 0] * P1 / noise[0]
        s2 = E[1, 1] * P2 / noise[1]
    else:
        s1 = E[0, 0] * P1 / (E[0, 1] * P2 + noise[0])
        s2 = E[1, 1] * P2 / (E[1, 0] * P1 + noise[1])
    ok = (s2 >= gamma2) & (base + c[0] * P1 + c[1] * P2 <= p_r_max)
    if not np.any(ok):
        return _infeasible(2, {})
    obj = np.where(ok, s1, -np.inf)
    i, k = np.unravel_index(np.argmax(obj), obj.shape)
    return PowerSolution(np.array([P1[i, k], P2[i, k]]), float(obj[i, k]), {}, feasible=True)


def grid_resolution(ch, R, p_s_max, grid_n):
    """Upper bound on how far the best grid point can trail the true optimum in ``sinr_1``.

    Moving ``p_1`` by one grid step changes ``sinr_1`` by at most
    ``|e_11|^2 dp / noise_1``; ``p_2`` only lowers it.
    """
    E = np.abs(ch.effective_gains(R)) ** 2
    noise = np.sum(np.abs(ch.G_dr.conj().T @ np.asarray(R)) ** 2, axis=1) + 1.0
    return float(E[0, 0] * p_s_max / (grid_n - 1) / noise[0])
