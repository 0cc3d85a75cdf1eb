import copy

import numpy as np
import pytest

from cfmimo import channel, metrics, orchestrator, overhead, precoder, scenario
from cfmimo.errors import ConfigError
from cfmimo.precoder import FilterWeightSet
from cfmimo.providers import ExpertProvider, ExternalProvider, FrozenProvider
from conftest import tiny_scenario


def desk_small(**overrides):
    base = dict(K=4, L=8, U=4, Nt=2, Nr=2, L_ue=3, I_card=3, N_RT=5, N_nRT=4)
    base.update(overrides)
    return tiny_scenario(**base)


class TestTimescales:
    def test_near_rt_index_spans(self):
        sim = orchestrator.Simulation(desk_small(), mode="expert")
        sim.run(23)
        for row in sim.rows:
            assert row.n == row.t // 5

    def test_episode_rollover(self):
        sc = desk_small()
        sim = orchestrator.Simulation(sc, mode="expert")
        sim.run(sc.N_RT * sc.N_nRT + 3)
        assert sim.episode == 1

    def test_run_episode_requires_boundary(self):
        sim = orchestrator.Simulation(desk_small(), mode="expert")
        sim.run(3)
        with pytest.raises(ConfigError):
            sim.run_episode()


class TestSnapshotDiscipline:
    def test_caches_stamped_and_frozen(self):
        sc = desk_small()
        sim = orchestrator.Simulation(sc, mode="expert")
        for t in range(12):
            sim.step()
            n = sim.rows[-1].n
            for cache in sim._caches:
                assert cache.stamp == n
        # within a period the cached entries must not move
        sim2 = orchestrator.Simulation(sc, mode="expert")
        sim2.step()
        snap = [
            {key: val.copy() for key, val in cache.h.items()} for cache in sim2._caches
        ]
        for _ in range(sc.N_RT - 1):
            sim2.step()
            for u, cache in enumerate(sim2._caches):
                for key, val in cache.h.items():
                    assert np.array_equal(val, snap[u][key])

    def test_d2_needs_cover_coupling(self):
        sc = desk_small()
        st = channel.build(sc)
        h_need, v_need = overhead.d2_needed_sets(sc, st, "scalable")
        for u in range(sc.U):
            for l in st.odu_orus[u]:
                for k in st.kl[l]:
                    for j in st.lue[k]:
                        if j == l or st.odu_of_oru[j] == u:
                            continue
                        assert (k, j) in v_need[u]
                        for i in st.kl[l]:
                            assert (i, j) in h_need[u]

    def test_single_odu_no_cache(self):
        sc = desk_small(U=1)
        sim = orchestrator.Simulation(sc, mode="expert")
        sim.run(6)
        assert sim.ledger.d2 == 0.0


class TestDeterminism:
    def test_bit_identical_reruns(self):
        sc = desk_small()
        a = orchestrator.Simulation(sc, mode="expert").run(25)
        b = orchestrator.Simulation(sc, mode="expert").run(25)
        for ra, rb in zip(a.rows, b.rows):
            assert np.array_equal(ra.rates, rb.rates)
            assert np.array_equal(ra.mu, rb.mu)
            assert np.array_equal(ra.power, rb.power)

    def test_parallel_odu_bit_identical(self):
        sc = desk_small()
        a = orchestrator.Simulation(sc, mode="expert", parallel_odu=False).run(20)
        b = orchestrator.Simulation(sc, mode="expert", parallel_odu=True).run(20)
        assert np.array_equal(a.V, b.V)
        for ra, rb in zip(a.rows, b.rows):
            assert np.array_equal(ra.rates, rb.rates)


class TestBcdEquivalence:
    def test_full_static_u1_matches_bcd_stepwise(self):
        # U=1, mode=full, static channel, frozen mu: the RT loop sequence is
        # exactly the centralized solver's iteration sequence
        sc = desk_small(
            U=1,
            N_RT=1,
            N_nRT=1000,
            v=tuple([0.0] * 4),
            delta=tuple([1e-300] * 4),
        )
        T = 9
        sim = orchestrator.Simulation(sc, mode="expert", v_update="full").run(T)
        res = precoder.bcd_solve(
            sim.state.H,
            sim.state.lue,
            sim.state.kl,
            sim.state.serve_mask,
            sc.Pmax,
            sc.noise_power,
            np.full(4, 2.0),
            max_iters=T,
            tol=-1.0,
        )
        assert res.iterations == T
        assert np.array_equal(sim.V, res.V)
        assert np.array_equal(sim.fws.U, res.U)
        assert np.array_equal(sim.fws.W, res.W)

    def test_expert_reaches_bcd_fixed_point(self):
        # moderate SNR gives a fast contraction, so both the loop engine and
        # the solver sit at the shared fixed point to well below 1e-8
        sc = desk_small(
            K=2,
            L=3,
            U=1,
            L_ue=2,
            N_RT=1,
            N_nRT=5000,
            I_card=2,
            v=tuple([0.0] * 2),
            delta=tuple([1e-300] * 2),
            noise_power=-60.0,
        )
        sim = orchestrator.Simulation(sc, mode="expert", v_update="full").run(300)
        # deep-run reference: the objective-based stop leaves the variables
        # ~1e-7 from the limit, so converge by iteration count instead
        res = precoder.bcd_solve(
            sim.state.H,
            sim.state.lue,
            sim.state.kl,
            sim.state.serve_mask,
            sc.Pmax,
            sc.noise_power,
            np.full(2, 2.0),
            max_iters=600,
            tol=-1.0,
        )
        assert np.abs(sim.fws.U - res.U).max() < 1e-8 * max(np.abs(res.U).max(), 1.0)
        assert np.abs(sim.fws.W - res.W).max() < 1e-8 * max(np.abs(res.W).max(), 1.0)


class TestFrozenPolicy:
    def test_static_channel_constant_rates(self):
        # moderate SNR so the precoder iteration settles within the run
        sc = desk_small(v=tuple([0.0] * 4), N_nRT=1000, noise_power=-60.0)
        warm = orchestrator.Simulation(sc, mode="expert").run(40)
        frozen = FrozenProvider(warm.fws)
        sim = orchestrator.Simulation(sc, mode="expert", provider=frozen).run(150)
        tail = np.stack([r.rates for r in sim.rows[-5:]])
        assert np.all(np.ptp(tail, axis=0) < 1e-9)


class TestRewards:
    def test_reward_is_period_mean(self):
        sc = desk_small()
        sim = orchestrator.Simulation(sc, mode="expert")
        sim.run_episode()
        per_loop = np.stack([r.rates for r in sim.rows])
        for tr in sim.transitions:
            start = tr.n * sc.N_RT
            expected = per_loop[start : start + sc.N_RT, tr.k].mean()
            assert abs(tr.reward - expected) < 1e-12 * max(1.0, abs(expected))

    def test_transition_count_single_period(self):
        sc = desk_small(N_nRT=1)
        sim = orchestrator.Simulation(sc, mode="expert")
        sim.run_episode()
        assert len(sim.transitions) == sc.K

    def test_episode_reward_sums_match_metrics(self):
        sc = desk_small()
        sim = orchestrator.Simulation(sc, mode="expert")
        sim.run_episode()
        per_loop = np.stack([r.rates for r in sim.rows])
        sums = sim.reward_sums()
        expected = per_loop.reshape(sc.N_nRT, sc.N_RT, sc.K).mean(axis=1).sum(axis=0)
        assert np.abs(sums - expected).max() < 1e-12 * max(1.0, np.abs(expected).max())


class TestLedger:
    def test_additivity(self):
        sc = desk_small()
        for mode in ("expert", "crzf", "drzf", "drl-wmmse"):
            sim = orchestrator.Simulation(sc, mode=mode).run(17)
            assert sum(r.e2_up for r in sim.rows) == sim.ledger.e2_up
            assert sum(r.e2_down for r in sim.rows) == sim.ledger.e2_down
            assert sum(r.d2 for r in sim.rows) == sim.ledger.d2
            assert sum(r.ofh for r in sim.rows) == sim.ledger.ofh

    def test_drzf_zero_e2(self):
        sim = orchestrator.Simulation(desk_small(), mode="drzf").run(10)
        report = overhead.overhead_report(sim.ledger, "drzf", sim.counts, 10, 5)
        assert report["e2_up"] == report["e2_down"] == 0.0
        assert report["reduction_vs_crzf_pct"] == 100.0

    def test_crzf_counts_per_rt_loop(self):
        sc = desk_small()
        sim = orchestrator.Simulation(sc, mode="crzf").run(10)
        sum_kl = sum(len(sim.state.kl[l]) for l in range(sc.L))
        expected_per_rt = sum_kl * (sc.Nr * sc.Nt + sc.Nt * sc.Ns) * 2
        assert sim.ledger.e2_up + sim.ledger.e2_down == expected_per_rt * 10

    def test_proposed_counts_per_near_rt(self):
        sc = desk_small()
        sim = orchestrator.Simulation(sc, mode="expert").run(10)  # 2 periods
        expected_up = sc.K * sc.I_card * sc.Nr * sc.Ns * 2 * 2
        expected_down = sc.K * (sc.Nr * sc.Ns + sc.Ns**2) * 2 * 2
        assert sim.ledger.e2_up == expected_up
        assert sim.ledger.e2_down == expected_down

    def test_drl_wmmse_counts_as_proposed(self):
        sc = desk_small()
        a = orchestrator.Simulation(sc, mode="expert").run(10)
        b = orchestrator.Simulation(sc, mode="drl-wmmse").run(10)
        assert a.ledger.e2_up == b.ledger.e2_up
        assert a.ledger.e2_down == b.ledger.e2_down


class TestImperfectCsi:
    def test_precoders_see_estimates_rates_see_truth(self):
        sc = desk_small(rho2=0.1)
        sim = orchestrator.Simulation(sc, mode="expert").run(7)
        assert sim.state.H_hat is not sim.state.H
        # rates recomputed from the true channel match the rows
        rates, agg, mn = metrics.rate_report(
            sim.state.H, sim.V, sim.state.serve_mask, sc.noise_power
        )
        assert np.array_equal(rates, sim.rows[-1].rates)

    def test_degradation_vs_perfect(self):
        base = desk_small(v=tuple([0.0] * 4))
        a = orchestrator.Simulation(base, mode="expert").run(40)
        b = orchestrator.Simulation(base.with_updates(rho2=0.3), mode="expert").run(40)
        tail_a = np.mean([r.aggregate for r in a.rows[-20:]])
        tail_b = np.mean([r.aggregate for r in b.rows[-20:]])
        assert tail_b < tail_a


class TestQosSchedule:
    def test_mu_reacts_at_scheduled_loop(self):
        sc = desk_small(v=tuple([0.0] * 4), N_nRT=50)
        sched = [{"t": 10, "k": 2, "r_min": 30.0}]
        sim = orchestrator.Simulation(sc, mode="expert", rmin_schedule=sched).run(20)
        mu2 = np.array([r.mu[2] for r in sim.rows])
        assert np.all(mu2[:10] <= 1.0)
        assert mu2[10] > mu2[9]

    def test_rzf_modes_keep_mu_static(self):
        sim = orchestrator.Simulation(desk_small(), mode="crzf").run(8)
        for row in sim.rows:
            assert np.all(row.mu == 1.0)


class TestProviderFallback:
    def test_invalid_action_falls_back_to_expert(self):
        sc = desk_small()

        def bad_act(n, xi_set, reward_prev, sim):
            return None

        sim = orchestrator.Simulation(
            sc, mode="agent", provider=ExternalProvider(bad_act)
        ).run(10)
        assert len(sim.events) == 2  # one fallback per near-RT boundary
        ref = orchestrator.Simulation(sc, mode="expert").run(10)
        for ra, rb in zip(sim.rows, ref.rows):
            assert np.array_equal(ra.rates, rb.rates)

    def test_echo_agent_matches_expert(self):
        # an agent that recomputes the expert action from the gathered
        # channels reproduces the expert run
        sc = desk_small()

        def echo(n, xi_set, reward_prev, sim):
            return precoder.filters_from_xi(xi_set)

        sim = orchestrator.Simulation(
            sc, mode="agent", provider=ExternalProvider(echo)
        ).run(15)
        ref = orchestrator.Simulation(sc, mode="expert").run(15)
        for ra, rb in zip(sim.rows, ref.rows):
            assert np.abs(ra.rates - rb.rates).max() < 1e-12
        assert not sim.events
