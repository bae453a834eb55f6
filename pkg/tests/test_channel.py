import numpy as np
import pytest

from irc_pareto import channel
from irc_pareto.channel import ChannelRealization, PowerBudget


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def sinr_direct(ch, p, R, j):
    """Per-term evaluation straight from the signal model."""
    K = ch.K
    eff = lambda i, l: ch.H[i, l] + ch.G_dr[:, i].conj() @ R @ ch.G_rt[:, l]
    interf = sum(abs(eff(j, l)) ** 2 * p[l] for l in range(K) if l != j)
    noise = np.linalg.norm(ch.G_dr[:, j].conj() @ R) ** 2 + 1.0
    return abs(eff(j, j)) ** 2 * p[j] / (interf + noise)


class TestChannelRealization:
    def test_shapes(self):
        ch = channel.draw_channel(3, 4, 0)
        assert (ch.K, ch.M) == (3, 4)
        assert ch.H.shape == (3, 3) and ch.G_rt.shape == (4, 3) and ch.G_dr.shape == (4, 3)

    def test_rejects_bad_shapes(self):
        with pytest.raises(ValueError):
            ChannelRealization(np.ones((2, 3)), np.ones((2, 2)), np.ones((2, 2)))
        with pytest.raises(ValueError):
            ChannelRealization(np.ones((2, 2)), np.ones((2, 2)), np.ones((3, 2)))

    def test_rejects_nonfinite(self):
        H = np.ones((2, 2))
        H[0, 0] = np.nan
        with pytest.raises(ValueError):
            ChannelRealization(H, np.ones((2, 2)), np.ones((2, 2)))

    def test_immutable(self):
        ch = channel.draw_channel(2, 2, 0)
        with pytest.raises(ValueError):
            ch.H[0, 0] = 1.0

    def test_json_roundtrip(self):
        ch = channel.draw_channel(2, 3, 5)
        back = ChannelRealization.from_json(ch.to_json())
        for a in ("H", "G_rt", "G_dr"):
            np.testing.assert_array_equal(getattr(back, a), getattr(ch, a))

    def test_json_declared_dims_checked(self):
        d = channel.draw_channel(2, 2, 0).to_dict()
        d["K"] = 3
        with pytest.raises(ValueError):
            ChannelRealization.from_dict(d)


class TestRng:
    def test_philox_frozen(self):
        # first standard normals of Philox4x64-10 with key 0, scaled by sqrt(1/2)
        ch = channel.draw_channel(2, 2, 0)
        assert ch.H[0, 0] == pytest.approx(0.11263890422527839 - 1.2545407341622272j, abs=1e-15)
        assert ch.G_dr[1, 1] == pytest.approx(-0.7871924688952666 - 0.3931296575685538j, abs=1e-15)

    def test_deterministic_and_indexed(self):
        a = channel.draw_channel(2, 2, 7, 3)
        b = channel.draw_channel(2, 2, 7, 3)
        c = channel.draw_channel(2, 2, 7, 4)
        np.testing.assert_array_equal(a.H, b.H)
        assert not np.allclose(a.H, c.H)

    def test_unit_variance(self):
        z = channel.complex_gaussian(channel.make_rng(1), (200000,))
        assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.01)
        assert abs(np.mean(z ** 2)) < 0.01

    def test_seed_range(self):
        with pytest.raises(ValueError):
            channel.make_rng(-1)


class TestSinr:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_direct_formula(self, seed):
        ch = channel.draw_channel(3, 2, seed)
        rng = np.random.default_rng(seed)
        R = crandn(rng, 2, 2)
        p = rng.uniform(0, 5, 3)
        for j in range(3):
            assert channel.sinr(ch, p, R, j) == pytest.approx(sinr_direct(ch, p, R, j), rel=1e-12)

    def test_relay_off_is_ic(self):
        ch = channel.draw_channel(2, 2, 1)
        p = np.array([2.0, 3.0])
        H2 = np.abs(ch.H) ** 2
        expected = H2[0, 0] * 2 / (H2[0, 1] * 3 + 1)
        assert channel.sinr(ch, p, np.zeros((2, 2)), 0) == pytest.approx(expected, rel=1e-14)

    def test_relay_power(self):
        ch = channel.draw_channel(2, 2, 2)
        R = crandn(np.random.default_rng(0), 2, 2)
        p = np.array([1.5, 0.5])
        direct = np.linalg.norm(R) ** 2 + sum(
            p[l] * np.linalg.norm(R @ ch.G_rt[:, l]) ** 2 for l in range(2))
        assert channel.relay_power(ch, p, R) == pytest.approx(direct, rel=1e-12)

    def test_sinr_in_requires_neutralization(self):
        ch = channel.draw_channel(2, 2, 3)
        with pytest.raises(channel.INResidualError):
            channel.sinr_in(ch, np.ones(2), np.zeros((2, 2)), 0)

    def test_sinr_in_diagonal_channel(self):
        H = np.diag([1.0 + 1j, 2.0])
        G = np.eye(2, dtype=complex)
        ch = ChannelRealization(H, G, G)
        p = np.array([3.0, 1.0])
        assert channel.satisfies_in(ch, np.zeros((2, 2)))
        assert channel.sinr_in(ch, p, np.zeros((2, 2)), 0) == pytest.approx(6.0)

    def test_rate(self):
        assert channel.rate(1.0) == 1.0
        np.testing.assert_allclose(channel.rate([0.0, 3.0]), [0.0, 2.0])
        with pytest.raises(ValueError):
            channel.rate(-0.1)


class TestPowerBudget:
    def test_full_power(self):
        np.testing.assert_array_equal(PowerBudget(10.0, 100.0).full_power(3), [10.0] * 3)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            PowerBudget(-1.0, 1.0)
