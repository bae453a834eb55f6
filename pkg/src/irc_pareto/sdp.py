"""Small dense complex-Hermitian SDPs and rank-one recovery.

Problems have the form::

    maximize   tr(C X)
    subject to tr(A_i X) {==, >=, <=} b_i,   X Hermitian PSD

They are solved on the real embedding ``X -> [[Re X, -Im X], [Im X, Re X]]``
with the primal-dual interior-point cone solver of ``cvxopt`` (NT scaling,
predictor-corrector).  Inequalities enter through a nonnegative slack cone.
"""

from dataclasses import dataclass, field
import json
from typing import Callable, Optional

import numpy as np
import cvxopt
from cvxopt import solvers

from . import linalg

SENSES = ("==", ">=", "<=")


@dataclass(frozen=True)
class HermitianSdp:
    C: np.ndarray
    constraints: list  # [(A, sense, b)]

    def __post_init__(self):
        C = np.asarray(self.C, dtype=complex)
        if not linalg.is_hermitian(C):
            raise linalg.NotHermitianError("objective matrix is not Hermitian")
        cons = []
        for A, sense, b in self.constraints:
            A = np.asarray(A, dtype=complex)
            if A.shape != C.shape:
                raise ValueError(f"constraint shape {A.shape} != objective {C.shape}")
            if not linalg.is_hermitian(A):
                raise linalg.NotHermitianError("constraint matrix is not Hermitian")
            if sense not in SENSES:
                raise ValueError(f"unknown constraint sense {sense!r}")
            cons.append((linalg.hermitize(A), sense, float(b)))
        object.__setattr__(self, "C", linalg.hermitize(C))
        object.__setattr__(self, "constraints", cons)

    @property
    def n(self):
        return self.C.shape[0]

    def values(self, X):
        """``tr(A_i X)`` for every constraint."""
        return np.array([np.real(np.sum(A.T * X)) for A, _, _ in self.constraints])

    def vector_values(self, v):
        return np.array([np.real(np.vdot(v, A @ v)) for A, _, _ in self.constraints])

    def objective(self, X):
        return float(np.real(np.sum(self.C.T * X)))

    def to_dict(self):
        enc = lambda a: [[[float(z.real), float(z.imag)] for z in row] for row in a]
        return {
            "n": self.n,
            "C": enc(self.C),
            "constraints": [
                {"A": enc(A), "sense": s, "b": b} for A, s, b in self.constraints
            ],
        }

    @classmethod
    def from_dict(cls, d):
        dec = lambda rows: (lambda a: a[..., 0] + 1j * a[..., 1])(np.asarray(rows, float))
        sdp = cls(dec(d["C"]), [(dec(c["A"]), c["sense"], c["b"]) for c in d["constraints"]])
        if sdp.n != d.get("n", sdp.n):
            raise ValueError("declared n does not match matrix size")
        return sdp

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class SdpOptions:
    tolerances: tuple = (1e-9, 1e-8, 1e-7)
    maxiters: int = 100
    residual_tol: float = 1e-7
    gap_tol: float = 1e-6
    rank_ratio: float = 1e-6
    verify_slack: float = 1e-6
    purify: bool = True


@dataclass
class SdpSolution:
    X: Optional[np.ndarray]
    objective: float
    status: str  # "optimal", "infeasible", "numerical_failure"
    rank: int = 0
    eigenvalues: np.ndarray = field(default=None, repr=False)
    duality_gap: float = np.inf
    residual: float = np.inf
    solver_status: str = ""
    iterations: int = 0
    extraction: Optional[str] = None  # "rank_one_exact", "rank_reduced", "randomized"
    raw_rank: int = 0  # rank of the interior-point solution before purification
    purified: bool = False


def embed(A):
    """Real symmetric embedding of a Hermitian matrix."""
    A = np.asarray(A)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def unembed(Y):
    """Hermitian matrix whose embedding has the same traces as ``Y``."""
    n = Y.shape[0] // 2
    re = 0.5 * (Y[:n, :n] + Y[n:, n:])
    im = 0.5 * (Y[n:, :n] - Y[:n, n:])
    return linalg.hermitize(re + 1j * im)


def _numerical_rank(w, ratio):
    if w.size == 0 or w[0] <= 0:
        return 0
    return int(np.sum(w > ratio * w[0]))


def solve(sdp, opts=None):
    """Solve ``sdp`` and report residuals, duality gap and numerical rank.

    cvxopt is handed the Lagrange dual in inequality form::

        minimize  b^T y   s.t.  sum_i y_i A_i - C  PSD,  y_i >= 0 (i: <=)

    whose LMI multiplier is the real-embedded primal ``X``.  The solve is
    repeated with looser stopping tolerances until the result passes the
    residual and gap checks of ``opts``.

    When the optimal face is not a single point the interior-point method
    returns a maximal-rank matrix in it; with ``opts.purify`` that matrix is
    replaced by a lowest-rank point of the same face (see ``purify``).
    """
    opts = opts or SdpOptions()
    problem = _ConeProblem(sdp)
    best = None
    for tol in opts.tolerances:
        sol = problem.run(tol, opts)
        if sol.status == "optimal":
            sol.raw_rank = sol.rank
            if opts.purify and sol.rank > 1:
                purify(sol, sdp, opts)
            return sol
        if sol.status == "infeasible":
            return sol
        if best is None or (sol.X is not None and sol.residual + sol.duality_gap
                            < best.residual + best.duality_gap):
            best = sol
    return best


class _ConeProblem:
    """The real-embedded, row-scaled problem in cvxopt's ``sdp`` format."""

    def __init__(self, sdp):
        self.sdp = sdp
        self.n2 = 2 * sdp.n
        self.cscale = np.linalg.norm(sdp.C) or 1.0
        self.C = embed(sdp.C) / (2.0 * self.cscale)
        self.cols, self.b, self.ineq_rows, self.scales = [], [], [], []
        for i, (A, sense, bi) in enumerate(sdp.constraints):
            s = np.linalg.norm(A) or 1.0
            sign = -1.0 if sense == ">=" else 1.0
            self.cols.append(-sign * embed(A).reshape(-1, order="F") / (2.0 * s))
            self.b.append(sign * bi / s)
            self.scales.append(s)
            if sense != "==":
                self.ineq_rows.append(i)
        self.b = np.asarray(self.b, dtype=float)

    def run(self, tol, opts):
        m, n2 = len(self.cols), self.n2
        Gs = cvxopt.matrix(np.column_stack(self.cols) if self.cols else np.zeros((n2 * n2, 0)))
        kwargs = {}
        if self.ineq_rows:
            Gl = np.zeros((len(self.ineq_rows), m))
            Gl[np.arange(len(self.ineq_rows)), self.ineq_rows] = -1.0
            kwargs = {"Gl": cvxopt.matrix(Gl),
                      "hl": cvxopt.matrix(np.zeros(len(self.ineq_rows)))}
        options = {"show_progress": False, "feastol": tol, "abstol": tol,
                   "reltol": tol, "maxiters": opts.maxiters}
        try:
            res = solvers.sdp(cvxopt.matrix(self.b), Gs=[Gs], hs=[cvxopt.matrix(-self.C)],
                              options=options, **kwargs)
        except (ValueError, ArithmeticError) as exc:
            return SdpSolution(None, np.nan, "numerical_failure", solver_status=str(exc))

        status = res["status"]
        iters = int(res.get("iterations", 0) or 0)
        if status == "dual infeasible":
            return SdpSolution(None, np.nan, "infeasible", solver_status=status,
                               iterations=iters)
        if res["zs"] is None or res["x"] is None:
            return SdpSolution(None, np.nan, "numerical_failure", solver_status=status,
                               iterations=iters)
        Z = np.array(res["zs"][0])
        X = unembed(np.tril(Z) + np.tril(Z, -1).T)
        w, U = np.linalg.eigh(X)
        X = linalg.hermitize((U * np.clip(w, 0.0, None)) @ U.conj().T)
        y = np.array(res["x"]).ravel()
        return self._assess(X, y, status, iters, opts)

    def _assess(self, X, y, status, iters, opts):
        sdp = self.sdp
        viol = []
        for (A, sense, bi), v, s in zip(sdp.constraints, sdp.values(X), self.scales):
            if sense == "==":
                viol.append(abs(v - bi) / s)
            elif sense == ">=":
                viol.append(max(0.0, bi - v) / s)
            else:
                viol.append(max(0.0, v - bi) / s)
        primal = sdp.objective(X)
        dual_obj = float(np.dot(self.b, y)) * self.cscale
        gap = abs(dual_obj - primal) / max(1.0, abs(primal))
        n2 = self.n2
        S = -self.C - sum(yi * col.reshape((n2, n2), order="F")
                          for yi, col in zip(y, self.cols))
        dual_res = max(0.0, -np.linalg.eigvalsh(0.5 * (S + S.T))[0])
        sign_res = max((max(0.0, -y[i]) for i in self.ineq_rows), default=0.0)
        residual = max(max(viol, default=0.0), dual_res, sign_res)
        w_desc = np.linalg.eigvalsh(X)[::-1]
        ok = residual < opts.residual_tol and gap < opts.gap_tol
        return SdpSolution(
            X=X,
            objective=primal,
            status="optimal" if ok else "numerical_failure",
            rank=_numerical_rank(w_desc, opts.rank_ratio),
            eigenvalues=w_desc,
            duality_gap=gap,
            residual=residual,
            solver_status=status,
            iterations=iters,
        )


def _normalize(v, sdp):
    """Rescale ``v`` to meet the first nonzero equality constraint exactly."""
    for A, sense, b in sdp.constraints:
        if sense == "==" and b != 0:
            val = float(np.real(np.vdot(v, A @ v)))
            if val <= 0 or b / val <= 0:
                return None
            return v * np.sqrt(b / val)
    return v


def vector_feasible(v, sdp, slack=1e-6):
    """Check ``v v^H`` against every constraint with relative slack."""
    vv = float(np.real(np.vdot(v, v)))
    for (A, sense, b), val in zip(sdp.constraints, sdp.vector_values(v)):
        tol = slack * max(1.0, abs(b), np.linalg.norm(A) * vv)
        if sense == "==" and abs(val - b) > tol:
            return False
        if sense == ">=" and val < b - tol:
            return False
        if sense == "<=" and val > b + tol:
            return False
    return True


def _rank_reduce(V, sdp, C, max_steps=64):
    """Lower the rank of ``V V^H`` keeping every ``tr(A_i X)`` fixed.

    Each step solves ``tr(V^H A_i V D) = 0`` for a Hermitian ``D`` and moves
    to ``V (I - a D) V^H`` with the step ``a`` that zeroes an eigenvalue.
    Possible whenever ``r^2`` exceeds the number of constraints.
    """
    for _ in range(max_steps):
        r = V.shape[1]
        if r <= 1:
            break
        # real parameterisation of Hermitian r x r matrices
        basis = []
        for i in range(r):
            E = np.zeros((r, r), dtype=complex)
            E[i, i] = 1.0
            basis.append(E)
            for j in range(i + 1, r):
                E = np.zeros((r, r), dtype=complex)
                E[i, j] = E[j, i] = 1.0
                basis.append(E)
                E = np.zeros((r, r), dtype=complex)
                E[i, j], E[j, i] = 1j, -1j
                basis.append(E)
        rows = []
        for A, _, _ in sdp.constraints:
            Ar = V.conj().T @ A @ V
            rows.append([np.real(np.sum(Ar.T * E)) for E in basis])
        ns = linalg.null_space(np.asarray(rows, dtype=float), tol=1e-9)
        if ns.shape[1] == 0:
            break
        D = sum(c * E for c, E in zip(np.real(ns[:, 0]), basis))
        d = np.linalg.eigvalsh(D)
        Cr = V.conj().T @ C @ V
        slope = -float(np.real(np.sum(Cr.T * D)))
        steps = []
        if d[-1] > 1e-14:
            steps.append(1.0 / d[-1])
        if d[0] < -1e-14:
            steps.append(1.0 / d[0])
        if not steps:
            break
        a = max(steps, key=lambda s: slope * s)
        w, U = np.linalg.eigh(np.eye(r) - a * D)
        keep = w > 1e-12 * max(w[-1], 1.0)
        V = V @ (U[:, keep] * np.sqrt(w[keep]))
    return V


def purify(sol, sdp, opts=None):
    """Move an optimal ``sol.X`` to a lower-rank matrix with the same constraint
    values and no smaller objective.  Accepted only if residual and objective
    checks still pass; returns True when ``sol`` was changed."""
    opts = opts or SdpOptions()
    w, U = linalg.herm_eig(sol.X, tol=1e-9)
    r = _numerical_rank(w, opts.rank_ratio)
    if r <= 1:
        return False
    V = _rank_reduce(U[:, :r] * np.sqrt(w[:r]), sdp, sdp.C)
    if V.shape[1] >= r:
        return False
    X = linalg.hermitize(V @ V.conj().T)
    scale = max(1.0, np.linalg.norm(sol.X))
    for (A, sense, b), val in zip(sdp.constraints, sdp.values(X)):
        tol = opts.residual_tol * max(1.0, np.linalg.norm(A) * scale)
        if (sense == "==" and abs(val - b) > tol or sense == ">=" and val < b - tol
                or sense == "<=" and val > b + tol):
            return False
    obj = sdp.objective(X)
    if obj < sol.objective - opts.gap_tol * max(1.0, abs(sol.objective)):
        return False
    w_desc = np.linalg.eigvalsh(X)[::-1]
    sol.X, sol.objective, sol.eigenvalues = X, obj, w_desc
    sol.rank = _numerical_rank(w_desc, opts.rank_ratio)
    sol.purified = True
    return True


def extract_rank_one(sol, sdp, opts=None):
    """A vector ``v`` with ``v v^H`` optimal for ``sdp``, or None.

    Numerically rank-one solutions give their principal eigenvector;
    otherwise a rank reduction within the optimal face is attempted.  The
    candidate is re-checked against every constraint before it is returned;
    ``sol.extraction`` records the path taken.
    """
    opts = opts or SdpOptions()
    if sol.status != "optimal":
        return None
    w, U = linalg.herm_eig(sol.X, tol=1e-9)
    if w[0] <= 0:
        return None
    if w.size == 1 or w[1] / w[0] < opts.rank_ratio:
        v = _normalize(np.sqrt(w[0]) * U[:, 0], sdp)
        if v is not None and vector_feasible(v, sdp, opts.verify_slack):
            sol.extraction = "rank_reduced" if sol.purified else "rank_one_exact"
            return v
        return None
    r = _numerical_rank(w, opts.rank_ratio)
    V = U[:, :r] * np.sqrt(w[:r])
    V = _rank_reduce(V, sdp, sdp.C)
    if V.shape[1] != 1:
        return None
    v = _normalize(V[:, 0], sdp)
    if v is None or not vector_feasible(v, sdp, opts.verify_slack):
        return None
    obj = float(np.real(np.vdot(v, sdp.C @ v)))
    if obj < sol.objective - opts.verify_slack * max(1.0, abs(sol.objective)):
        return None
    sol.extraction = "rank_reduced"
    return v


def randomize(sol, sdp, count=1000, rng_seed=0, repair: Optional[Callable] = None,
              slack=1e-6):
    """Gaussian randomization: best feasible draw from CN(0, X), or None.

    Each draw is rescaled to the normalization constraint; ``repair`` may
    map an infeasible draw to a feasible one (or return None).
    """
    if sol.X is None:
        return None
    w, U = np.linalg.eigh(sol.X)
    w = np.clip(w, 0.0, None)
    root = U * np.sqrt(w)
    rng = np.random.Generator(np.random.Philox(key=int(rng_seed)))
    z = (rng.standard_normal((sdp.n, count)) + 1j * rng.standard_normal((sdp.n, count)))
    draws = root @ (z / np.sqrt(2.0))
    best, best_obj = None, -np.inf
    for k in range(count):
        v = _normalize(draws[:, k], sdp)
        if v is None:
            continue
        if not vector_feasible(v, sdp, slack):
            if repair is None:
                continue
            v = repair(v)
            if v is None:
                continue
            v = _normalize(v, sdp)
            if v is None or not vector_feasible(v, sdp, slack):
                continue
        obj = float(np.real(np.vdot(v, sdp.C @ v)))
        if obj > best_obj:
            best, best_obj = v, obj
    if best is not None:
        sol.extraction = "randomized"
    return best
