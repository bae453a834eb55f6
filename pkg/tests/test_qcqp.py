import json

import numpy as np
import pytest

from irc_pareto import channel, linalg, qcqp
from irc_pareto import neutralization as nz


def quad(A, v):
    return float(np.real(np.vdot(v, A @ v)))


def random_setup(seed, K=2, M=2):
    ch = channel.draw_channel(K, M, seed)
    rng = channel.make_rng(seed, 77)
    R = 0.5 * channel.complex_gaussian(rng, (M, M))
    p = rng.uniform(0.1, 10.0, K)
    return ch, R, p, rng


class TestGeneralForms:
    @pytest.mark.parametrize("seed", range(6))
    def test_sinr_ratio(self, seed):
        ch, R, p, rng = random_setup(seed, K=3, M=2)
        t = rng.uniform(0.5, 2.0)
        v = t * qcqp.homogenize(R)
        for i in range(3):
            num = quad(qcqp.general_signal(ch, p, i), v)
            den = quad(qcqp.general_interference_noise(ch, p, i), v)
            assert num / den == pytest.approx(channel.sinr(ch, p, R, i), rel=1e-10)

    @pytest.mark.parametrize("seed", range(4))
    def test_power_form(self, seed):
        ch, R, p, _ = random_setup(seed)
        v = qcqp.homogenize(R)
        val = quad(qcqp.general_power(ch, p, 3.0), v)
        assert val == pytest.approx(channel.relay_power(ch, p, R) - 3.0, rel=1e-10)

    def test_constraint_sign_matches_target(self):
        ch, R, p, _ = random_setup(0)
        s2 = channel.sinr(ch, p, R, 1)
        for gamma, ok in ((0.5 * s2, True), (2.0 * s2, False)):
            inst = qcqp.build_general(ch, p, [gamma], 10.0)
            assert (quad(inst.sinr_constraints[0][2], qcqp.homogenize(R)) >= 0) == ok

    def test_zero_target_is_signal_block(self):
        ch, _, p, _ = random_setup(1)
        inst = qcqp.build_general(ch, p, [0.0], 10.0)
        np.testing.assert_allclose(inst.sinr_constraints[0][2], qcqp.general_signal(ch, p, 1))

    def test_dimensions_and_hermitian(self):
        ch, _, p, _ = random_setup(2, K=3, M=3)
        inst = qcqp.build_general(ch, p, [1.0, 2.0], 5.0)
        assert inst.dim == 10
        assert all(linalg.is_hermitian(m) for m in inst.matrices())

    def test_target_validation(self):
        ch, _, p, _ = random_setup(0)
        with pytest.raises(ValueError):
            qcqp.build_general(ch, p, [1.0, 2.0], 5.0)
        with pytest.raises(ValueError):
            qcqp.build_general(ch, p, [-1.0], 5.0)

    def test_single_user_drops_interference(self):
        ch, R, p, _ = random_setup(3)
        inst = qcqp.build_single_user_general(ch, p, 10.0, 1)
        v = qcqp.homogenize(R)
        noise = np.linalg.norm(ch.G_dr[:, 1].conj() @ R) ** 2 + 1
        assert quad(inst.objective_den, v) == pytest.approx(noise, rel=1e-10)
        assert inst.sinr_constraints == []


class TestInForms:
    @pytest.mark.parametrize("seed", range(6))
    def test_ratio_and_noise_chain(self, seed):
        ch, _, p, rng = random_setup(seed)
        S = nz.build_s(ch.H, channel.complex_gaussian(rng, (2,)))
        R = nz.relay_from_s(ch, S)
        y = qcqp.homogenize(S)
        for i in range(2):
            noise = np.linalg.norm(ch.G_dr[:, i].conj() @ R) ** 2 + 1.0
            assert quad(qcqp.in_noise(ch, i), y) == pytest.approx(noise, rel=1e-10)
            ratio = quad(qcqp.in_signal(ch, p, i), y) / quad(qcqp.in_noise(ch, i), y)
            assert ratio == pytest.approx(channel.sinr_in(ch, p, R, i), rel=1e-10)
        assert quad(qcqp.in_power(ch, p, 2.0), y) == pytest.approx(
            channel.relay_power(ch, p, R) - 2.0, rel=1e-10)

    def test_structure_form(self):
        ch, _, _, rng = random_setup(4)
        D4 = qcqp.in_structure(ch)
        w = np.linalg.eigvalsh(D4)
        assert np.sum(w > 1e-10 * w.max()) == 2
        S_ok = nz.build_s(ch.H, channel.complex_gaussian(rng, (2,)))
        assert quad(D4, qcqp.homogenize(S_ok)) == pytest.approx(0.0, abs=1e-12)
        S_bad = S_ok.copy()
        S_bad[0, 1] += 0.1
        assert quad(D4, qcqp.homogenize(S_bad)) == pytest.approx(0.01, rel=1e-9)

    @pytest.mark.parametrize("K", [2, 3])
    def test_projection(self, K):
        ch = channel.draw_channel(K, K, 9)
        p = np.full(K, 2.0)
        inst = qcqp.build_in(ch, p, [0.3] * (K - 1), 50.0)
        proj = qcqp.project_null(inst)
        assert proj.dim == K + 1 and proj.in_constraint is None
        # every projected vector lifts to a neutralizing S
        x = channel.complex_gaussian(channel.make_rng(9, 1), (K + 1,))
        y = proj.lift(x)
        S = linalg.unvec(y[:-1] / y[-1], K)
        off = ~np.eye(K, dtype=bool)
        np.testing.assert_allclose(S[off], -ch.H[off], atol=1e-10)
        assert quad(proj.objective_num, x) == pytest.approx(quad(inst.objective_num, y), rel=1e-10)

    def test_project_requires_in(self):
        ch, _, p, _ = random_setup(0)
        with pytest.raises(ValueError):
            qcqp.project_null(qcqp.build_general(ch, p, [0.1], 1.0))


class TestRecovery:
    def test_general_roundtrip(self):
        ch, R, p, _ = random_setup(5)
        inst = qcqp.build_general(ch, p, [0.1], 10.0)
        np.testing.assert_allclose(qcqp.recover_relay(0.7j * qcqp.homogenize(R), inst, ch), R,
                                   atol=1e-12)

    def test_in_roundtrip(self):
        ch, _, p, rng = random_setup(6)
        S = nz.build_s(ch.H, channel.complex_gaussian(rng, (2,)))
        inst = qcqp.build_in(ch, p, [0.1], 10.0)
        R = qcqp.recover_relay(2.0 * qcqp.homogenize(S), inst, ch)
        np.testing.assert_allclose(nz.s_from_relay(ch, R), S, atol=1e-10)

    def test_degenerate(self):
        ch, R, p, _ = random_setup(5)
        inst = qcqp.build_general(ch, p, [0.1], 10.0)
        v = qcqp.homogenize(R)
        v[-1] = 0.0
        with pytest.raises(qcqp.DegenerateRecoveryError):
            qcqp.recover_relay(v, inst, ch)


class TestSerialization:
    def test_dict_is_json(self):
        ch, _, p, _ = random_setup(0)
        inst = qcqp.project_null(qcqp.build_in(ch, p, [0.2], 10.0))
        d = json.loads(json.dumps(inst.to_dict()))
        assert d["kind"] == "in" and d["dim"] == 3
        assert np.asarray(d["projection"]).shape == (5, 3, 2)

    def test_to_sdp_senses(self):
        ch, _, p, _ = random_setup(0)
        sdp = qcqp.build_in(ch, p, [0.2], 10.0).to_sdp()
        assert [c[1] for c in sdp.constraints] == ["==", ">=", "<=", "=="]
