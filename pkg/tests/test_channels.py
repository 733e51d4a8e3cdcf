import math

import numpy as np
import pytest

from qcapacity.channels import (
    BASIS_X,
    BASIS_Z,
    GilbertElliottChannel,
    Preparation,
    PreparedQubit,
    apply,
    fully_depolarizing,
    gilbert_elliott,
    identity,
    iid_dephasing,
    iid_depolarizing,
    parse_channel,
    transmon_like,
)


def uniform_prep(n, seed=0, basis=None):
    rng = np.random.default_rng(seed)
    b = rng.integers(0, 2, n) if basis is None else np.full(n, basis)
    return Preparation(b, rng.integers(0, 2, n))


def three_sigma(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


class TestFlipTables:
    def test_dephasing(self):
        ch = iid_dephasing(0.1)
        assert ch.flip_probability("X", 0) == ch.flip_probability("X", 1) == pytest.approx(0.05)
        assert ch.flip_probability("Z", 0) == ch.flip_probability("Z", 1) == 0.0

    def test_dephasing_zero_is_identity(self):
        np.testing.assert_array_equal(iid_dephasing(0.0).flip_table, identity().flip_table)

    def test_dephasing_axis_swap(self):
        np.testing.assert_array_equal(iid_dephasing(0.3, "X").flip_table,
                                      iid_dephasing(0.3, "Z").flip_table[::-1])

    def test_depolarizing(self):
        np.testing.assert_allclose(iid_depolarizing(0.04).flip_table, 0.02)
        np.testing.assert_allclose(iid_depolarizing(1.0).flip_table, 0.5)
        np.testing.assert_allclose(iid_depolarizing(0.0).flip_table, 0.0)

    def test_fully_depolarizing(self):
        np.testing.assert_allclose(fully_depolarizing().flip_table, 0.5)

    def test_transmon_identity_limit(self):
        np.testing.assert_allclose(transmon_like(18.5, 3.8, 0.0, 0.0, 0.0).flip_table, 0.0)

    def test_transmon_long_time_limit(self):
        t = transmon_like(18.5, 3.8, 1e6, 0.0, 0.0).flip_table
        assert t[BASIS_X, 0] == t[BASIS_X, 1] == pytest.approx(0.5)
        assert t[BASIS_Z, 1] == pytest.approx(0.5)
        assert t[BASIS_Z, 0] == 0.0

    def test_transmon_experiment_parameters(self):
        # mpmath values for T1=18.5, T2*=3.8, dt=0.3 (us), readout 2% each way
        t = transmon_like(18.5, 3.8, 0.3, 0.02, 0.02).flip_table
        assert t[BASIS_X, 0] == pytest.approx(0.0564374914855151, rel=1e-12)
        assert t[BASIS_Z, 1] == pytest.approx(0.0277210117894801, rel=1e-12)
        assert t[BASIS_Z, 0] == pytest.approx(0.02)

    @pytest.mark.parametrize("factory,args", [
        (iid_dephasing, (1.1,)), (iid_depolarizing, (-0.1,)),
        (transmon_like, (0.0, 1.0, 1.0, 0.0, 0.0)), (transmon_like, (1.0, 1.0, 1.0, 1.2, 0.0)),
        (gilbert_elliott, (0.1, 0.1, 0.1, 1.1)),
    ])
    def test_domain_errors(self, factory, args):
        with pytest.raises(ValueError):
            factory(*args)


class TestApply:
    def test_identity_returns_prepared(self):
        prep = uniform_prep(1000)
        np.testing.assert_array_equal(apply(identity(), prep, 3), prep.bit)

    def test_accepts_prepared_qubit_sequence(self):
        qubits = [PreparedQubit(0, "X", 1), PreparedQubit(1, "Z", 0), PreparedQubit(2, "D", 1)]
        np.testing.assert_array_equal(apply(identity(), qubits, 0), [1, 0, 1])
        assert list(Preparation.from_qubits(qubits)) == qubits

    def test_rejects_gapped_slots(self):
        with pytest.raises(ValueError, match="contiguous"):
            Preparation.from_qubits([PreparedQubit(1, "X", 0)])

    @pytest.mark.parametrize("channel", [fully_depolarizing(), iid_dephasing(0.2),
                                         gilbert_elliott(0.05, 0.2, 0.01, 0.4)])
    def test_seed_determinism(self, channel):
        prep = uniform_prep(200_000)
        np.testing.assert_array_equal(apply(channel, prep, 11), apply(channel, prep, 11))
        assert not np.array_equal(apply(channel, prep, 11), apply(channel, prep, 12))

    def test_threads_do_not_change_output(self):
        prep = uniform_prep(300_000)
        single = iid_depolarizing(0.3)
        multi = iid_depolarizing(0.3)
        multi.threads = 4
        np.testing.assert_array_equal(apply(single, prep, 5), apply(multi, prep, 5))

    def test_dephasing_empirical_rate(self):
        n = 10**6
        prep = uniform_prep(n, basis=BASIS_X)
        rate = np.mean(apply(iid_dephasing(0.1), prep, 1) != prep.bit)
        assert abs(rate - 0.05) <= three_sigma(0.05, n)

    @pytest.mark.parametrize("channel,basis,p", [
        (iid_depolarizing(0.04), BASIS_X, 0.02), (iid_depolarizing(0.04), BASIS_Z, 0.02),
        (fully_depolarizing(), BASIS_Z, 0.5), (iid_dephasing(0.1), BASIS_Z, 0.0),
    ])
    def test_iid_rates_converge(self, channel, basis, p):
        n = 10**6
        prep = uniform_prep(n, seed=2, basis=basis)
        rate = np.mean(apply(channel, prep, 9) != prep.bit)
        assert abs(rate - p) <= max(three_sigma(p, n), 0.0)

    def test_fully_depolarizing_uniform_over_strings(self):
        # chi-square over 2**4 outcome strings of a fixed 4-qubit preparation
        prep = Preparation([0, 1, 0, 1], [0, 0, 1, 1])
        ch = fully_depolarizing()
        counts = np.zeros(16)
        weights = 1 << np.arange(4)
        for seed in range(20_000):
            counts[int(apply(ch, prep, seed) @ weights)] += 1
        expected = counts.sum() / 16
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        assert chi2 < 37.7  # 99.9% quantile of chi-square with 15 dof

    def test_all_zero_outcomes_probability(self):
        # P[e_x = e_z = 0] = 2**-N for the fully mixed output
        prep = Preparation([0, 1, 0], [1, 0, 0])
        ch = fully_depolarizing()
        hits = sum(np.array_equal(apply(ch, prep, s), prep.bit) for s in range(40_000))
        assert abs(hits / 40_000 - 1 / 8) <= three_sigma(1 / 8, 40_000)


class TestGilbertElliott:
    def test_equal_flips_reduce_to_iid(self):
        n = 10**6
        prep = uniform_prep(n)
        ch = gilbert_elliott(0.01, 0.1, 0.07, 0.07)
        flips = apply(ch, prep, 4) != prep.bit
        assert abs(flips.mean() - 0.07) <= three_sigma(0.07, n)
        lag1 = np.corrcoef(flips[:-1], flips[1:])[0, 1]
        assert abs(lag1) < 4 / math.sqrt(n)

    def test_absorbing_good_state(self):
        ch = gilbert_elliott(0.0, 0.5, 0.02, 0.9)
        states = ch.states(10**5, np.random.default_rng(0))
        assert not states.any()

    def test_explicit_start_states(self):
        rng = np.random.default_rng(0)
        bad = GilbertElliottChannel(0.0, 0.0, 0.0, 1.0, start="bad")
        assert bad.states(100, rng).all()
        assert GilbertElliottChannel(0.0, 0.0, 0.0, 1.0).stationary_bad == 0.0

    def test_stationary_flip_rate(self):
        ch = gilbert_elliott(0.01, 0.1, 0.01, 0.3)
        assert ch.long_run_flip_rate() == pytest.approx(0.004 / 0.11)
        n = 10**7
        prep = uniform_prep(n)
        rate = np.mean(apply(ch, prep, 21) != prep.bit)
        # correlated flips: the binomial sigma is inflated by the chain's
        # integrated autocorrelation, roughly (1 + lambda) / (1 - lambda) ~ 17
        assert abs(rate - 0.0363636) < 3 * math.sqrt(17) * math.sqrt(0.0364 / n) * 2

    def test_state_occupancy_and_sojourns(self):
        ch = gilbert_elliott(0.02, 0.25, 0.0, 1.0)
        s = ch.states(2 * 10**6, np.random.default_rng(3))
        assert s.mean() == pytest.approx(0.02 / 0.27, rel=0.03)
        leave_good = np.mean(s[1:][s[:-1] == 0] == 1)
        leave_bad = np.mean(s[1:][s[:-1] == 1] == 0)
        assert leave_good == pytest.approx(0.02, rel=0.03)
        assert leave_bad == pytest.approx(0.25, rel=0.03)

    def test_positive_lag_one_autocorrelation(self):
        n = 10**6
        prep = uniform_prep(n)
        flips = (apply(gilbert_elliott(0.01, 0.1, 0.01, 0.3), prep, 8) != prep.bit).astype(float)
        assert np.corrcoef(flips[:-1], flips[1:])[0, 1] > 10 / math.sqrt(n)

    def test_basis_dependent_flips(self):
        n = 400_000
        ch = gilbert_elliott(0.0, 0.0, (0.1, 0.0), (0.5, 0.5))
        for basis, p in ((BASIS_X, 0.1), (BASIS_Z, 0.0)):
            prep = uniform_prep(n, basis=basis)
            assert abs(np.mean(apply(ch, prep, 1) != prep.bit) - p) <= three_sigma(p, n)

    def test_small_chunks_fill_exactly(self):
        ch = gilbert_elliott(0.9, 0.9, 0.0, 1.0)
        s = ch.states(10_001, np.random.default_rng(0))
        assert s.size == 10_001
        # frequent switching: both states present and near-alternating
        assert np.mean(s[1:] != s[:-1]) == pytest.approx(0.9, abs=0.02)


class TestParse:
    @pytest.mark.parametrize("spec", [
        "identity", "fully-depolarizing", "dephasing:0.1", "dephasing:0.1,X",
        "depolarizing:0.04", "ge:0.01,0.1,0.01,0.3", "ge:0.01,0.1,0.01/0.02,0.3,good",
        "transmon:18.5,3.8,0.3,0.02,0.02",
    ])
    def test_round_trip(self, spec):
        ch = parse_channel(spec)
        again = parse_channel(ch.describe())
        assert again.describe() == ch.describe()

    def test_parsed_values(self):
        assert parse_channel("dephasing:0.1").flip_probability("X", 0) == pytest.approx(0.05)
        ge = parse_channel("ge:0.01,0.1,0.01,0.3")
        assert ge.long_run_flip_rate() == pytest.approx(0.0363636, rel=1e-5)

    @pytest.mark.parametrize("spec", ["nope", "dephasing", "dephasing:a", "dephasing:1.5",
                                      "ge:0.1,0.1,0.1", "identity:3", "ge:0.1,0.1,1/2/3,0.1"])
    def test_invalid(self, spec):
        with pytest.raises(ValueError):
            parse_channel(spec)
