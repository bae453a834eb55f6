"""Pareto-boundary sweeps, the relay-free baseline and region metrics.

The boundary of a K-user region is sampled by fixing SINR targets for users
2..K on a grid and maximizing user 1's SINR over the relay matrix.  Each grid
point is one homogeneous QCQP, relaxed to an SDP, solved, and turned back
into a relay matrix whose rates are recomputed from the channel directly.
"""

from dataclasses import dataclass, field
import csv
import io
import itertools
import json
from typing import Optional

import numpy as np

from . import qcqp
from .channel import (
    rate,
    relay_power,
    relay_q,
    satisfies_in,
    sinrs,
)
from .neutralization import check_in_feasibility
from .power import optimal_power_general, optimal_power_in
from .sdp import SdpOptions, extract_rank_one, randomize, solve

MODES = ("general", "in")
KINDS = ("ic_baseline", "general_relay", "in_relay")
DEFAULT_GRID_N = 20
VERIFY_SLACK = 1e-6
RANDOMIZATION_DRAWS = 1000


@dataclass
class ParetoPoint:
    rates: np.ndarray
    targets: np.ndarray
    relay: Optional[np.ndarray]
    powers: np.ndarray
    feasible: bool
    extraction: str = ""
    gap: float = float("nan")
    rank: int = 0

    @property
    def sinr1(self):
        return float(2.0 ** self.rates[0] - 1.0)

    def to_dict(self):
        rel = None if self.relay is None else [
            [[float(z.real), float(z.imag)] for z in row] for row in self.relay
        ]
        return {
            "rates": [float(r) for r in self.rates],
            "targets": [float(g) for g in self.targets],
            "powers": [float(x) for x in self.powers],
            "relay": rel,
            "feasible": bool(self.feasible),
            "extraction": self.extraction,
            "gap": None if not np.isfinite(self.gap) else float(self.gap),
            "rank": int(self.rank),
        }

    @classmethod
    def from_dict(cls, d):
        rel = d.get("relay")
        if rel is not None:
            a = np.asarray(rel, dtype=float)
            rel = a[..., 0] + 1j * a[..., 1]
        gap = d.get("gap")
        return cls(
            rates=np.asarray(d["rates"], dtype=float),
            targets=np.asarray(d["targets"], dtype=float),
            relay=rel,
            powers=np.asarray(d["powers"], dtype=float),
            feasible=bool(d["feasible"]),
            extraction=d.get("extraction", ""),
            gap=float("nan") if gap is None else float(gap),
            rank=int(d.get("rank", 0)),
        )


@dataclass
class RateRegion:
    points: list
    kind: str
    channel_id: int = 0
    config: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")

    @property
    def feasible_points(self):
        return [pt for pt in self.points if pt.feasible]

    @property
    def K(self):
        return len(self.points[0].rates) if self.points else 0

    def to_csv(self):
        K = self.K
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow([f"gamma_{j}" for j in range(2, K + 1)]
                   + [f"rate_{j}" for j in range(1, K + 1)]
                   + ["feasible", "extraction", "gap"])
        for pt in self.points:
            w.writerow([_fmt(g) for g in pt.targets]
                       + [_fmt(r) for r in pt.rates]
                       + [int(pt.feasible), pt.extraction, _fmt(pt.gap)])
        return out.getvalue()

    def to_dict(self):
        return {
            "kind": self.kind,
            "channel_id": self.channel_id,
            "config": self.config,
            "diagnostics": self.diagnostics,
            "points": [pt.to_dict() for pt in self.points],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            points=[ParetoPoint.from_dict(p) for p in d["points"]],
            kind=d["kind"],
            channel_id=d.get("channel_id", 0),
            config=d.get("config", {}),
            diagnostics=d.get("diagnostics", {}),
        )

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _fmt(x):
    x = float(x)
    return "nan" if not np.isfinite(x) else repr(x)


def _rates(s):
    return rate(np.clip(s, 0.0, None))


def _infeasible_point(K, targets, p, extraction, gap=float("nan")):
    return ParetoPoint(np.zeros(K), np.asarray(targets, float), None, np.asarray(p, float),
                       False, extraction, gap)


def _kind(mode):
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    return "general_relay" if mode == "general" else "in_relay"


def _power_repair(inst, ch):
    """Shrink the relay matrix of a general-mode draw onto the power budget."""
    Qk = np.kron(relay_q(ch, inst.p).T, np.eye(ch.M))

    def repair(v):
        if abs(v[-1]) == 0:
            return None
        r = v[:-1] / v[-1]
        pw = float(np.real(np.vdot(r, Qk @ r)))
        if pw <= inst.p_r_max:
            return None
        return np.append(r * np.sqrt(inst.p_r_max / pw), 1.0)

    return repair


def _relay_feasible(ch, p, R, targets, p_r_max, mode, slack=VERIFY_SLACK):
    s = sinrs(ch, p, R)
    if relay_power(ch, p, R) > p_r_max * (1 + slack) + slack:
        return False, s
    if np.any(s[1:] < np.asarray(targets) * (1 - slack)):
        return False, s
    if mode == "in" and not satisfies_in(ch, R):
        return False, s
    return True, s


def solve_instance(inst, ch, opts=None, rng_seed=0):
    """Relay matrix optimal for ``inst`` (or None) plus solver diagnostics."""
    opts = opts or SdpOptions()
    work = qcqp.project_null(inst) if inst.kind == "in" else inst
    sdp = work.to_sdp()
    sol = solve(sdp, opts)
    diag = {"status": sol.status, "gap": sol.duality_gap, "rank": sol.rank,
            "objective": sol.objective, "extraction": sol.status}
    if sol.status != "optimal":
        return None, diag
    v = extract_rank_one(sol, sdp, opts)
    if v is None:
        repair = _power_repair(work, ch) if work.kind == "general" else None
        v = randomize(sol, sdp, RANDOMIZATION_DRAWS, rng_seed, repair, opts.verify_slack)
    if v is None:
        diag["extraction"] = "extraction_failed"
        return None, diag
    diag["extraction"] = sol.extraction
    try:
        R = qcqp.recover_relay(v, work, ch)
    except qcqp.DegenerateRecoveryError:
        diag["extraction"] = "degenerate_recovery"
        return None, diag
    return R, diag


def single_user_solution(ch, p, p_r_max, j, mode="general", opts=None):
    """Best interference-free SINR of user ``j`` under the relay budget, and its relay.

    Returns ``(gamma_max, R)``; ``R`` is None when no relay is found (IN
    infeasible or solver failure), in which case ``gamma_max`` is 0.
    """
    p = np.asarray(p, dtype=float)
    if mode == "in":
        if not check_in_feasibility(ch, p, p_r_max).feasible:
            return 0.0, None
        inst = qcqp.build_single_user_in(ch, p, p_r_max, j)
    else:
        _kind(mode)
        inst = qcqp.build_single_user_general(ch, p, p_r_max, j)
    R, _ = solve_instance(inst, ch, opts)
    if R is None:
        return 0.0, None
    noise = np.sum(np.abs(ch.G_dr[:, j].conj() @ R) ** 2) + 1.0
    gain = abs(ch.effective_gains(R)[j, j]) ** 2
    return float(gain * p[j] / noise), R


def single_user_point(ch, p, p_r_max, j, mode="general", opts=None):
    return single_user_solution(ch, p, p_r_max, j, mode, opts)[0]


def _point_from_relay(ch, p, R, targets, p_r_max, mode, extraction, diag=None):
    ok, s = _relay_feasible(ch, p, R, targets, p_r_max, mode)
    if not ok:
        return _infeasible_point(ch.K, targets, p, "verification_failed")
    diag = diag or {}
    return ParetoPoint(_rates(s), np.asarray(targets, float), R, np.asarray(p, float), True,
                       extraction, diag.get("gap", float("nan")), diag.get("rank", 1))


def solve_pb(ch, p, targets, p_r_max, mode="general", opts=None, in_feasible=None,
             rng_seed=0):
    """One boundary point: maximize user 1's SINR subject to the targets of users 2..K."""
    p = np.asarray(p, dtype=float)
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    if mode == "in":
        if in_feasible is None:
            in_feasible = check_in_feasibility(ch, p, p_r_max).feasible
        if not in_feasible:
            return _infeasible_point(ch.K, targets, p, "in_infeasible")
        inst = qcqp.build_in(ch, p, targets, p_r_max)
    else:
        _kind(mode)
        inst = qcqp.build_general(ch, p, targets, p_r_max)
    R, diag = solve_instance(inst, ch, opts, rng_seed)
    if R is None:
        return _infeasible_point(ch.K, targets, p, diag["extraction"], diag["gap"])
    return _point_from_relay(ch, p, R, targets, p_r_max, mode, diag["extraction"], diag)


def refine_power(point, ch, p_s_max, p_r_max, mode="general"):
    """Re-optimize the source powers of a boundary point for its relay matrix."""
    if not point.feasible or point.relay is None:
        return point
    fn = optimal_power_in if mode == "in" else optimal_power_general
    try:
        sol = fn(ch, point.relay, point.targets, p_s_max, p_r_max)
    except ValueError:
        return point
    if not sol.feasible or sol.achieved_sinr1 <= point.sinr1:
        return point
    s = sinrs(ch, sol.p, point.relay)
    return ParetoPoint(_rates(s), point.targets, point.relay, sol.p, True,
                       point.extraction + "+power", point.gap, point.rank)


def target_grid(gamma_max, grid_n):
    """Cartesian product of ``{0, g/(N-1), ..., g}`` over users 2..K, user 2 slowest."""
    if grid_n < 2:
        raise ValueError("grid_n must be >= 2")
    axes = [np.linspace(0.0, g, grid_n) for g in gamma_max]
    return [np.array(t) for t in itertools.product(*axes)]


def sweep_boundary(ch, p, p_r_max, mode="general", grid_n=DEFAULT_GRID_N, opts=None,
                   extra_targets=(), p_s_max=None, channel_id=0):
    """Sample the Pareto boundary on the target grid.

    ``extra_targets`` are solved after the grid (for example the relay-free
    equilibrium SINRs).  With ``p_s_max`` given, every feasible point also
    gets its source powers re-optimized for the found relay matrix.
    Per-point failures are recorded, never raised.
    """
    kind = _kind(mode)
    p = np.asarray(p, dtype=float)
    K = ch.K
    in_ok = check_in_feasibility(ch, p, p_r_max).feasible if mode == "in" else None
    singles = [single_user_solution(ch, p, p_r_max, j, mode, opts) if in_ok is not False
               else (0.0, None) for j in range(1, K)]
    gamma_max = [g for g, _ in singles]
    tuples = target_grid(gamma_max, grid_n) + [np.atleast_1d(np.asarray(t, float))
                                               for t in extra_targets]
    points = []
    for idx, t in enumerate(tuples):
        pt = solve_pb(ch, p, t, p_r_max, mode, opts, in_ok, rng_seed=idx)
        if not pt.feasible and in_ok is not False:
            pt = _endpoint_fallback(ch, p, t, p_r_max, mode, singles, pt)
        if p_s_max is not None:
            pt = refine_power(pt, ch, p_s_max, p_r_max, mode)
        points.append(pt)
    counts = {}
    for pt in points:
        counts[pt.extraction] = counts.get(pt.extraction, 0) + 1
    return RateRegion(
        points=points,
        kind=kind,
        channel_id=channel_id,
        config={"mode": mode, "grid_n": grid_n, "p": [float(x) for x in p],
                "p_r_max": float(p_r_max),
                "p_s_max": None if p_s_max is None else float(p_s_max)},
        diagnostics={"gamma_max": [float(g) for g in gamma_max],
                     "in_feasible": in_ok, "extraction_counts": counts},
    )


def _endpoint_fallback(ch, p, targets, p_r_max, mode, singles, failed):
    """At ``gamma_j = gamma_j^max`` the feasible set can shrink to a single
    relay matrix, which interior-point solvers cannot certify; that matrix is
    the single-user solution of user j, so try it directly."""
    if failed.extraction not in ("numerical_failure", "extraction_failed"):
        return failed
    for j, (g, R) in enumerate(singles, start=1):
        if R is None or g <= 0 or targets[j - 1] < g * (1 - 1e-9):
            continue
        pt = _point_from_relay(ch, p, R, targets, p_r_max, mode, "single_user")
        if pt.feasible:
            return pt
    return failed


def ic_baseline_region(ch, p_s_max, grid_n=101, channel_id=0):
    """Relay-free rates over a ``grid_n x grid_n`` grid of source powers (K = 2)."""
    if ch.K != 2:
        raise ValueError("the relay-free baseline grid is limited to K = 2")
    axis = np.linspace(0.0, p_s_max, grid_n)
    P1, P2 = (a.ravel() for a in np.meshgrid(axis, axis, indexing="ij"))
    H2 = np.abs(ch.H) ** 2
    s1 = H2[0, 0] * P1 / (H2[0, 1] * P2 + 1.0)
    s2 = H2[1, 1] * P2 / (H2[1, 0] * P1 + 1.0)
    r1, r2 = np.log2(1.0 + s1), np.log2(1.0 + s2)
    zero = np.zeros((ch.M, ch.M), complex)
    points = [ParetoPoint(np.array([r1[i], r2[i]]), np.array([s2[i]]), zero,
                          np.array([P1[i], P2[i]]), True, "grid", 0.0, 0)
              for i in range(P1.size)]
    region = RateRegion(points, "ic_baseline", channel_id,
                        {"p_s_max": float(p_s_max), "grid_n": grid_n})
    return envelope(region)


def envelope(region):
    """Drop infeasible and strictly dominated points; raw count kept in diagnostics.

    Points are visited in decreasing lexicographic rate order, so any
    dominating point is seen first and only kept points need checking.
    Survivors keep their original order.
    """
    pts = region.feasible_points
    if pts:
        rates = np.array([pt.rates for pt in pts])
        order = np.lexsort(-rates.T[::-1])
        kept = []
        for i in order:
            r = rates[i]
            if kept:
                k = rates[kept]
                if np.any(np.all(k >= r, axis=1) & np.any(k > r, axis=1)):
                    continue
            kept.append(i)
        pts = [pts[i] for i in sorted(kept)]
    diag = dict(region.diagnostics, raw_points=len(region.points))
    return RateRegion(pts, region.kind, region.channel_id, dict(region.config), diag)


def nash_equilibrium_rates(ch, p_s_max, R=None):
    """Rates when every source transmits at full power (relay off unless ``R`` given)."""
    R = np.zeros((ch.M, ch.M), complex) if R is None else np.asarray(R)
    return _rates(sinrs(ch, np.full(ch.K, float(p_s_max)), R))


def max_sum_rate(region):
    pts = region.feasible_points
    if not pts:
        raise ValueError("region has no feasible points")
    return float(max(np.sum(pt.rates) for pt in pts))


def proportional_fairness(region, ne):
    """``max prod_j max(R_j - R_j^NE, 0)`` over the feasible points (0 if none gain)."""
    ne = np.asarray(ne, dtype=float)
    best = 0.0
    for pt in region.feasible_points:
        best = max(best, float(np.prod(np.clip(pt.rates - ne, 0.0, None))))
    return best


def channel_regions(ch, p_s_max, p_r_max, modes=("ic", "general", "in"),
                    grid_n=DEFAULT_GRID_N, ic_grid_n=101, opts=None, channel_id=0,
                    refine=False):
    """All requested regions of one channel at full source power."""
    p = np.full(ch.K, float(p_s_max))
    ne = nash_equilibrium_rates(ch, p_s_max)
    out = {}
    for mode in modes:
        if mode == "ic":
            out[mode] = ic_baseline_region(ch, p_s_max, ic_grid_n, channel_id)
            continue
        if mode == "in" and ch.M != ch.K:
            continue
        anchor = [2.0 ** ne[1:] - 1.0] if mode == "general" else []
        out[mode] = sweep_boundary(ch, p, p_r_max, mode, grid_n, opts, anchor,
                                   p_s_max if refine else None, channel_id)
    return out, ne

