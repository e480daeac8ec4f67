import math

import pytest

from pcpow.attacks import (
    dampened_catchup_deficit,
    raising_attack_prob,
    simple_attack_limit,
    simple_attack_prob,
)
from pcpow.races import (
    raising_attack_race,
    simple_attack_race,
    stale_ref_attack,
)


class TestSimpleAttackProb:
    def test_no_adversary_no_success(self):
        assert simple_attack_prob(1e6, 0.0, 20) == 0.0

    def test_matches_exponential_limit(self):
        # n k = 2e7: the exact expression sits within 1e-3 of 1 - e^(-t/n).
        exact = simple_attack_prob(1e6, 3e5, 20)
        limit = simple_attack_limit(1e6, 3e5)
        assert limit == pytest.approx(1 - math.exp(-0.3))
        assert abs(exact - limit) < 1e-3

    def test_depth_independence(self):
        a = simple_attack_prob(1e4, 5e3, 10)
        b = simple_attack_prob(1e4, 5e3, 100)
        assert abs(a - b) < 1e-3

    def test_monotone_in_adversary_rate(self):
        vals = [simple_attack_prob(1e5, t, 20) for t in (1e3, 1e4, 5e4, 9e4)]
        assert all(x < y for x, y in zip(vals, vals[1:]))

    def test_converges_as_nk_grows(self):
        limit = simple_attack_limit(10.0, 3.0)
        gaps = [
            abs(simple_attack_prob(10.0, 3.0, k) - limit)
            for k in (10, 100, 1000, 10000)
        ]
        assert all(x > y for x, y in zip(gaps, gaps[1:]))

    def test_domain_error(self):
        with pytest.raises(ValueError):
            simple_attack_prob(0.5, 0.1, 1)

    def test_monte_carlo_race_within_3_sigma(self):
        n, t, k, trials = 1e4, 3e3, 20, 20_000
        exact = simple_attack_prob(n, t, k)
        freq = simple_attack_race(n, t, k, trials, seed=5)
        sigma = math.sqrt(exact * (1 - exact) / trials)
        assert abs(freq - exact) < 3 * sigma


class TestRaisingAttackProb:
    def test_limit_for_huge_difficulty(self):
        # X >> phi >> 1 approaches the simple-attack limit.
        val = raising_attack_prob(1e4, 3e3, 100, 1e9)
        assert val == pytest.approx(simple_attack_limit(1e4, 3e3), abs=1e-4)

    def test_zero_when_exponent_nonpositive(self):
        # X t <= (n - t) phi: the adversary cannot even reach the race.
        assert raising_attack_prob(1e4, 3e3, 1000, 1000) == 0.0

    def test_monte_carlo_race_within_3_sigma(self):
        n, t, phi, x, trials = 1e4, 3e3, 500, 20_000, 20_000
        exact = raising_attack_prob(n, t, phi, x)
        freq = raising_attack_race(n, t, phi, x, trials, seed=6)
        sigma = math.sqrt(exact * (1 - exact) / trials)
        assert abs(freq - exact) < 3 * sigma


class TestDampenedCatchup:
    def test_half_power_bitcoin_epoch(self):
        # n = 2t, damping 4, epoch 2016 -> 672 blocks of deficit.
        assert dampened_catchup_deficit(2.0, 1.0, 4.0, 2016) == 672

    def test_full_power_no_deficit(self):
        assert dampened_catchup_deficit(1.0, 1.0, 4.0, 2016) == 0

    def test_unbounded_damping_kills_deficit(self):
        assert dampened_catchup_deficit(2.0, 1.0, 1e12, 2016) == pytest.approx(
            0.0, abs=1e-6
        )

    def test_no_damping_is_an_error(self):
        with pytest.raises(ValueError):
            dampened_catchup_deficit(2.0, 1.0, 1.0, 2016)


class TestStaleRefAttack:
    def test_monotonicity_rejects_with_rule_on(self):
        out = stale_ref_attack(0.3, 20, trials=500, seed=3, enforce_m2=True)
        assert out.successes == 0
        assert out.rejected_by_validator
        assert out.violation == "monotonicity"

    def test_constant_success_with_rule_off(self):
        for k in (10, 20):
            out = stale_ref_attack(0.3, k, trials=4000, seed=3,
                                   enforce_m2=False)
            assert not out.rejected_by_validator
            assert out.frequency > 0.2
            assert abs(out.frequency - (1 - math.exp(-0.3))) < 0.05
