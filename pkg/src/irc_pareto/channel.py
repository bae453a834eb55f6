"""Channel realizations of the K-user instantaneous AF interference relay channel.

Everything here is linear scale with unit noise power at the relay and at
every destination, so powers are SNRs.

Conventions: ``H[j, l]`` is the direct gain S_l -> D_j, column ``G_rt[:, l]``
is S_l -> relay, column ``G_dr[:, j]`` is relay -> D_j (applied as
``G_dr[:, j].conj() @ R``).
"""

from dataclasses import dataclass
import json

import numpy as np

IN_RESIDUAL_TOL = 1e-6


class INResidualError(ValueError):
    """Raised when a relay matrix does not neutralize interference."""


@dataclass(frozen=True)
class ChannelRealization:
    H: np.ndarray
    G_rt: np.ndarray
    G_dr: np.ndarray

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        G_rt = np.asarray(self.G_rt, dtype=complex)
        G_dr = np.asarray(self.G_dr, dtype=complex)
        K = H.shape[0]
        if H.shape != (K, K):
            raise ValueError(f"H must be square, got {H.shape}")
        if G_rt.ndim != 2 or G_rt.shape[1] != K:
            raise ValueError(f"G_rt must be M x {K}, got {G_rt.shape}")
        if G_dr.shape != G_rt.shape:
            raise ValueError(f"G_dr must be {G_rt.shape}, got {G_dr.shape}")
        for name, arr in (("H", H), ("G_rt", G_rt), ("G_dr", G_dr)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "G_rt", G_rt)
        object.__setattr__(self, "G_dr", G_dr)

    @property
    def K(self):
        return self.H.shape[0]

    @property
    def M(self):
        return self.G_rt.shape[0]

    def effective_gains(self, R):
        """``E[j, l] = h_jl + g_jr^H R g_rl`` for all pairs."""
        return self.H + self.G_dr.conj().T @ np.asarray(R) @ self.G_rt

    def to_dict(self):
        return {
            "K": self.K,
            "M": self.M,
            "H": _encode(self.H),
            "G_rt": _encode(self.G_rt),
            "G_dr": _encode(self.G_dr),
        }

    @classmethod
    def from_dict(cls, d):
        ch = cls(_decode(d["H"]), _decode(d["G_rt"]), _decode(d["G_dr"]))
        if "K" in d and d["K"] != ch.K or "M" in d and d["M"] != ch.M:
            raise ValueError("declared K/M do not match array shapes")
        return ch

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _encode(a):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def _decode(rows):
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrices are encoded as rows of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


@dataclass(frozen=True)
class PowerBudget:
    p_s_max: float
    p_r_max: float

    def __post_init__(self):
        if not (self.p_s_max >= 0 and self.p_r_max >= 0):
            raise ValueError("power budgets must be nonnegative")

    def full_power(self, K):
        return np.full(K, float(self.p_s_max))


def make_rng(seed, index=0):
    """Philox4x64-10 keyed by ``seed`` (low 64 bits) and ``index`` (high 64 bits)."""
    if seed < 0 or index < 0 or seed >= 2**64 or index >= 2**64:
        raise ValueError("seed and index must be in [0, 2**64)")
    return np.random.Generator(np.random.Philox(key=(int(index) << 64) | int(seed)))


def complex_gaussian(rng, shape):
    """Circularly-symmetric CN(0, 1) samples: real and imaginary parts N(0, 1/2)."""
    z = rng.standard_normal(shape + (2,)) * np.sqrt(0.5)
    return z[..., 0] + 1j * z[..., 1]


def draw_channel(K, M, rng_seed, index=0):
    """One i.i.d. CN(0, 1) realization, drawn in the order H, G_rt, G_dr."""
    if K < 1 or M < 1:
        raise ValueError("K and M must be >= 1")
    rng = make_rng(rng_seed, index)
    H = complex_gaussian(rng, (K, K))
    G_rt = complex_gaussian(rng, (M, K))
    G_dr = complex_gaussian(rng, (M, K))
    return ChannelRealization(H, G_rt, G_dr)


def relay_q(ch, p):
    """Covariance of the relay's received vector, ``sum_j g_rj g_rj^H p_j + I``."""
    p = np.asarray(p, dtype=float)
    return (ch.G_rt * p) @ ch.G_rt.conj().T + np.eye(ch.M)


def relay_power(ch, p, R):
    """Relay transmit power ``tr(R Q(p) R^H)``."""
    R = np.asarray(R)
    return float(np.real(np.trace(R @ relay_q(ch, p) @ R.conj().T)))


def amplified_noise(ch, R):
    """``||g_jr^H R||^2`` for every destination j."""
    return np.sum(np.abs(ch.G_dr.conj().T @ np.asarray(R)) ** 2, axis=1)


def sinr(ch, p, R, j):
    """SINR at destination ``j`` (0-based) with the relay matrix ``R``."""
    p = np.asarray(p, dtype=float)
    gains = np.abs(ch.effective_gains(R)[j]) ** 2
    interference = np.dot(np.delete(gains, j), np.delete(p, j))
    return float(gains[j] * p[j] / (interference + amplified_noise(ch, R)[j] + 1.0))


def sinrs(ch, p, R):
    return np.array([sinr(ch, p, R, j) for j in range(ch.K)])


def in_residual(ch, R):
    """Largest cross gain ``|h_ij + g_ir^H R g_rj|``, i != j."""
    E = ch.effective_gains(R)
    off = E[~np.eye(ch.K, dtype=bool)]
    return float(np.max(np.abs(off), initial=0.0))


def satisfies_in(ch, R, tol=IN_RESIDUAL_TOL):
    scale = max(float(np.max(np.abs(ch.H))), np.finfo(float).tiny)
    return in_residual(ch, R) <= tol * scale


def sinr_in(ch, p, R, j, tol=IN_RESIDUAL_TOL):
    """SINR at destination ``j`` when ``R`` neutralizes all interference."""
    if not satisfies_in(ch, R, tol):
        raise INResidualError(
            f"relay matrix leaves interference residual {in_residual(ch, R):.3e}"
        )
    p = np.asarray(p, dtype=float)
    signal = abs(ch.effective_gains(R)[j, j]) ** 2 * p[j]
    return float(signal / (amplified_noise(ch, R)[j] + 1.0))


def rate(s):
    """Achievable rate ``log2(1 + s)`` in bits per channel use."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR must be nonnegative")
    out = np.log2(1.0 + s)
    return float(out) if out.ndim == 0 else out
