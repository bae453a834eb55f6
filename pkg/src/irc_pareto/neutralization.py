"""Interference neutralization (IN) with an M = K relay.

A relay matrix neutralizes interference iff ``G_dr^H R G_rt = S`` where the
off-diagonal entries of ``S`` equal ``-H`` and only the diagonal ``s`` is
free.  With invertible channels ``R = G_dr^{-H} S G_rt^{-1}`` and the relay
power becomes the quadratic form ``vec(S)^H Qt vec(S)``.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .channel import relay_power

COND_LIMIT = 1e12
FEASIBILITY_SLACK = 1e-9


class SingularChannelError(ValueError):
    pass


class INInfeasibleError(ValueError):
    pass


def _require_square(ch):
    if ch.M != ch.K:
        raise ValueError(
            f"interference neutralization is implemented for M == K only "
            f"(got K={ch.K}, M={ch.M})"
        )
    for name, g in (("G_rt", ch.G_rt), ("G_dr", ch.G_dr)):
        cond = np.linalg.cond(g)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            raise SingularChannelError(f"{name} is singular (cond={cond:.3e})")


def build_s(H, s):
    """Full S matrix: diagonal ``s``, off-diagonal ``-H``."""
    H = np.asarray(H)
    S = -H.astype(complex)
    S[np.diag_indices_from(S)] = np.asarray(s, dtype=complex)
    return S


def rt_gram(ch):
    """``G_rt^{-*} G_rt^{-T}``, the source-side Gram factor of the noise term."""
    inv = np.linalg.inv(ch.G_rt)
    return inv.conj() @ inv.T


def q_tilde(ch, p):
    """Relay-power form in S coordinates: ``tr(R Q R^H) = vec(S)^H Qt vec(S)``."""
    _require_square(ch)
    inv_dr = np.linalg.inv(ch.G_dr)
    left = np.diag(np.asarray(p, dtype=float)) + rt_gram(ch)
    right = inv_dr @ inv_dr.conj().T
    return linalg.hermitize(np.kron(left, right))


def relay_from_s(ch, S):
    """Relay matrix with ``G_dr^H R G_rt == S``."""
    _require_square(ch)
    # (G_rt^T kron G_dr^H)^{-1} vec(S) without forming the Kronecker product
    X = np.linalg.solve(ch.G_dr.conj().T, np.asarray(S, dtype=complex))
    return np.linalg.solve(ch.G_rt.T, X.T).T


def s_from_relay(ch, R):
    return ch.G_dr.conj().T @ np.asarray(R) @ ch.G_rt


@dataclass
class InFeasibilityReport:
    feasible: bool
    min_power: float
    budget: float
    x_h: np.ndarray
    basis_xn: np.ndarray
    F: np.ndarray
    p: np.ndarray

    def to_dict(self):
        return {
            "feasible": bool(self.feasible),
            "min_power": float(self.min_power),
            "budget": float(self.budget),
            "p": [float(v) for v in self.p],
            "x_h": [[float(z.real), float(z.imag)] for z in self.x_h],
            "nullity": int(self.basis_xn.shape[1]),
        }


def _inverse_quadratic(A, b):
    """``b^H A^{-1} b`` for Hermitian PD ``A``; pseudo-inverse if ill conditioned."""
    if np.linalg.cond(A) < COND_LIMIT:
        try:
            c = np.linalg.cholesky(A)
            z = np.linalg.solve(c, b)
            return float(np.real(np.vdot(z, z)))
        except np.linalg.LinAlgError:
            pass
    return float(np.real(np.vdot(b, linalg.pinv(A, 1e-10) @ b)))


def min_in_power(ch, p):
    """Smallest relay power of any neutralizing relay at source powers ``p``."""
    T, _ = linalg.selection_matrices(ch.K)
    b = T @ linalg.vec(ch.H)
    Qt_inv = np.linalg.inv(q_tilde(ch, p))
    return _inverse_quadratic(linalg.hermitize(T @ Qt_inv @ T.T), b)


def check_in_feasibility(ch, p, p_r_max):
    """Decide whether some neutralizing relay meets the budget ``p_r_max``.

    With ``Qt = W diag(g) W^H`` and ``F = W diag(g)^{-1/2}``, every S that
    satisfies the IN structure is ``vec(S) = F (x_n + x_h)`` where ``x_n``
    ranges over the null space of ``T F`` and ``x_h = -(T F)^+ T vec(H)``.
    The minimum power is ``||x_h||^2``.
    """
    K = ch.K
    Qt = q_tilde(ch, p)
    gam, W = np.linalg.eigh(Qt)
    if gam[0] <= 0:
        raise SingularChannelError("relay power form is not positive definite")
    F = W / np.sqrt(gam)
    T, _ = linalg.selection_matrices(K)
    TF = T @ F
    b = T @ linalg.vec(ch.H)
    x_h = -linalg.pinv(TF) @ b
    basis = linalg.null_space(TF)
    if basis.shape[1] != K:
        raise SingularChannelError(f"T F has nullity {basis.shape[1]}, expected {K}")
    min_power = _inverse_quadratic(linalg.hermitize(TF @ TF.conj().T), b)
    return InFeasibilityReport(
        feasible=bool(min_power <= p_r_max + FEASIBILITY_SLACK),
        min_power=min_power,
        budget=float(p_r_max),
        x_h=x_h,
        basis_xn=basis,
        F=F,
        p=np.asarray(p, dtype=float).copy(),
    )


def in_solution(report, ch, x_n=None):
    """S and R for ``vec(S) = F (x_n + x_h)``; ``x_n`` must lie in the null space."""
    x = report.x_h if x_n is None else report.x_h + np.asarray(x_n)
    S_raw = linalg.unvec(report.F @ x, ch.K)
    S = build_s(ch.H, np.diag(S_raw))
    return S, relay_from_s(ch, S)


def minimal_in_relay(report, ch):
    """Cheapest neutralizing relay (``x_n = 0``)."""
    if not report.feasible:
        raise INInfeasibleError(
            f"IN needs relay power {report.min_power:.6g} > budget {report.budget:.6g}"
        )
    return in_solution(report, ch)


def feasibility_frontier(ch, p_r_max, lo=0.0, hi=1e4, tol=1e-9, max_iter=200):
    """Largest common source power ``P_s`` at which IN is still feasible.

    The minimum IN power grows with the source powers, so the feasible set
    in ``P_s`` is an interval ``[0, P_s*]``; returns ``P_s*`` (``hi`` if the
    whole bracket is feasible, ``None`` if even ``lo`` is infeasible).
    """
    K = ch.K
    feasible = lambda ps: min_in_power(ch, np.full(K, ps)) <= p_r_max + FEASIBILITY_SLACK
    if not feasible(lo):
        return None
    if feasible(hi):
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return lo


def in_relay_power(ch, p, S):
    """Relay power of the neutralizing relay built from ``S``."""
    return relay_power(ch, p, relay_from_s(ch, S))
