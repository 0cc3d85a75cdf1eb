"""Acceptance gate: one test per release criterion, each printing a
PASS/FAIL line. Run with `pytest tests/test_acceptance.py -v -s`."""

import time

import numpy as np
import pytest

from cfmimo import (
    _kernels,
    channel,
    cli,
    metrics,
    orchestrator,
    overhead,
    precoder,
    scenario,
)
from conftest import DESK_CONFIG, random_complex, tiny_scenario
from test_metrics import build_uw, make_instance, objective_v1


def report(name, ok, detail=""):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def desk():
    return scenario.load(DESK_CONFIG)


def test_criterion_01_bcd_monotonicity():
    """20 seeded desk instances: non-increasing objective, < 5 s total."""
    t0 = time.time()
    worst = 0.0
    for seed in range(20):
        sc = tiny_scenario(K=3, L=4, Nt=2, Nr=2, L_ue=2, I_card=2, seed=1000 + seed)
        st = channel.build(sc)
        res = precoder.bcd_solve(
            st.H, st.lue, st.kl, st.serve_mask, sc.Pmax, sc.noise_power, np.ones(3),
            max_iters=40, tol=1e-12, record_blocks=True,
        )
        bt = np.array(res.block_trace)
        rel = np.diff(bt) / np.maximum(1.0, np.abs(bt[:-1]))
        worst = max(worst, rel.max())
    elapsed = time.time() - t0
    report(
        "1 BCD monotonicity",
        worst <= 1e-9 and elapsed < 5.0,
        f"worst step {worst:.2e}, {elapsed:.2f}s",
    )


def test_criterion_02_single_user_oracle():
    """K=1, L=1, Nr=1: converged rate equals the matched-filter closed form."""
    worst = 0.0
    for nt in (1, 2, 4):
        rng = np.random.default_rng(50 + nt)
        h = (rng.standard_normal((1, 1, 1, nt)) + 1j * rng.standard_normal((1, 1, 1, nt))) * 1e-5
        pmax, noise = 1.0, 4e-15
        res = precoder.bcd_solve(
            h, [[0]], [[0]], np.ones((1, 1), bool), pmax, noise, np.ones(1),
            max_iters=300, tol=1e-12,
        )
        rates, _, _ = metrics.rate_report(h, res.V, np.ones((1, 1), bool), noise)
        expected = float(np.log2(1 + pmax * (np.abs(h[0, 0, 0]) ** 2).sum() / noise))
        worst = max(worst, abs(rates[0] - expected))
    report("2 single-user oracle", worst < 1e-6, f"worst |err| {worst:.2e}")


def test_criterion_03_power_feasibility_slackness(desk):
    """10^4 RT loops pooled over the four modes: budget respected and the
    constraint tight whenever xi > 0."""
    loops_per_mode = 2500
    worst_over = 0.0
    worst_slack = 0.0
    for mode in ("expert", "drl-wmmse", "crzf", "drzf"):
        sim = orchestrator.Simulation(desk, mode=mode)
        sim.run(loops_per_mode)
        for row in sim.rows:
            worst_over = max(worst_over, (row.power.max() - desk.Pmax) / desk.Pmax)
            for l in range(desk.L):
                if row.xi[l] > 0:
                    worst_slack = max(worst_slack, abs(row.power[l] - desk.Pmax) / desk.Pmax)
    report(
        "3 power feasibility + slackness",
        worst_over <= 1e-9 and worst_slack <= 1e-8,
        f"max overshoot {worst_over:.2e}, max slackness gap {worst_slack:.2e}",
    )


def test_criterion_04_appendix_equivalences():
    """Randomized differencing for both appendix reformulations, 500 draws."""
    worst_a = 0.0
    for seed in range(500):
        rng = np.random.default_rng(seed)
        sc, H, Va, mask, lue, kl, _ = make_instance(seed=seed, K=2, L=2, Nr=2, Nt=2)
        Vb = np.where(mask[:, :, None, None], random_complex(rng, Va.shape), 0.0)
        U, W = build_uw(rng, 2, 2, 2)
        omega = rng.uniform(0.5, 2.0, 2)
        X = {i: U[i] @ W[i] @ U[i].conj().T for i in range(2)}
        Y = {i: W[i] @ U[i].conj().T for i in range(2)}
        xia = metrics.effective_channels(H, Va, mask, 0.3)
        xib = metrics.effective_channels(H, Vb, mask, 0.3)
        lhs = objective_v1(omega, W, U, xia) - objective_v1(omega, W, U, xib)
        rhs = metrics.global_v_objective(omega, xia, X, Y) - metrics.global_v_objective(
            omega, xib, X, Y
        )
        worst_a = max(worst_a, abs(lhs - rhs))

    worst_b = 0.0
    for seed in range(500):
        rng = np.random.default_rng(20_000 + seed)
        sc, H, Va, mask, lue, kl, _ = make_instance(seed=seed + 7, K=2, L=3, Nr=2, Nt=2)
        l = int(rng.integers(0, 3))
        if not kl[l]:
            continue
        Vb = Va.copy()
        for k in kl[l]:
            Vb[k, l] = random_complex(rng, (2, 2))
        U, W = build_uw(rng, 2, 2, 2)
        omega = rng.uniform(0.5, 2.0, 2)
        X = {i: U[i] @ W[i] @ U[i].conj().T for i in range(2)}
        Y = {i: W[i] @ U[i].conj().T for i in range(2)}
        xia = metrics.effective_channels(H, Va, mask, 0.3)
        xib = metrics.effective_channels(H, Vb, mask, 0.3)
        lhs = metrics.global_v_objective(omega, xia, X, Y) - metrics.global_v_objective(
            omega, xib, X, Y
        )
        view = precoder.ArrayView(H, Va, lue=lue)
        ctx = metrics.PerOruContext(
            h_at={i: H[i, l] for i in range(2)},
            x=X,
            y=Y,
            z={
                (i, k): precoder.compute_Z(i, k, l, view, lue[k])
                for i in range(2)
                for k in kl[l]
            },
            omega=omega,
            users=kl[l],
            i_range=[0, 1],
        )
        rhs = metrics.per_oru_objective(l, {k: Va[k, l] for k in kl[l]}, ctx) - \
            metrics.per_oru_objective(l, {k: Vb[k, l] for k in kl[l]}, ctx)
        worst_b = max(worst_b, abs(lhs - rhs))
    report(
        "4 appendix equivalence suites",
        worst_a < 1e-9 and worst_b < 1e-9,
        f"max residual A {worst_a:.2e}, B {worst_b:.2e}",
    )


def test_criterion_05_rate_mse_identity():
    """r_k = -log2 det(E_k) = log2 det(W_k) at the MMSE filter, 100 instances."""
    worst = 0.0
    count = 0
    for seed in range(34):
        sc, H, V, mask, *_ = make_instance(seed=seed, K=3)
        xi = metrics.effective_channels(H, V, mask, 0.3)
        for k in range(3):
            j = metrics.rx_covariance(xi, k)
            u = precoder.update_U(j, xi.xi[k, k])
            e = metrics.mse_matrix(xi, u, k)
            w = precoder.update_W(e)
            r = metrics.user_rate(metrics.sinr_matrix(xi, k))
            scale = max(1.0, abs(r))
            worst = max(
                worst,
                abs(r + numerics_logdet(e)) / scale,
                abs(r - numerics_logdet(w)) / scale,
            )
            count += 1
    report("5 rate/MSE identity", worst < 1e-8 and count >= 100, f"worst {worst:.2e} over {count}")


def numerics_logdet(a):
    from cfmimo import numerics

    return numerics.logdet_hpd(a)


def test_criterion_06_xi_bisection():
    """10^4 random diagonal sets at 1e-8 residual; Nt=1 closed form to 1e-12."""
    rng = np.random.default_rng(99)
    worst_res = 0.0
    for _ in range(10_000):
        nt = int(rng.integers(1, 9))
        phi = 10.0 ** rng.uniform(-4, 4, nt)
        lam = 10.0 ** rng.uniform(-4, 4, nt)
        pmax = 10.0 ** rng.uniform(-1, 1)
        xi = precoder.solve_xi(phi, lam, pmax)
        power = _kernels.power_at_xi(phi, lam, xi)
        if xi > 0:
            worst_res = max(worst_res, abs(power - pmax) / pmax)
        else:
            assert power <= pmax * (1 + 1e-12)
    worst_cf = 0.0
    for _ in range(500):
        phi = 10.0 ** rng.uniform(-4, 4)
        lam = 10.0 ** rng.uniform(-4, 4)
        pmax = 10.0 ** rng.uniform(-1, 1)
        expected = max(0.0, float(np.sqrt(phi / pmax) - lam))
        got = precoder.solve_xi([phi], [lam], pmax)
        worst_cf = max(worst_cf, abs(got - expected) / max(1.0, expected))
    report(
        "6 xi bisection",
        worst_res < 1e-8 and worst_cf <= 1e-12,
        f"worst residual {worst_res:.2e}, closed-form err {worst_cf:.2e}",
    )


def paper_scale_doc():
    return {
        "K": 48, "L": 100, "U": 4, "Nt": 4, "Nr": 2, "area_side": 500.0,
        "oru_height": 10.0, "ue_height": 2.0, "Pmax": 30.0, "noise_power": -114.0,
        "fc": 2e9, "T": 1e-3, "N_RT": 10, "N_nRT": 100, "L_ue": 8, "I_card": 6,
        "R_min": 4.0, "v": 1.4, "delta": 0.1, "rzf_lambda": None, "rho2": 0.0,
        "seed": 11,
    }


def paper_counts(**overrides):
    doc = paper_scale_doc()
    doc.update(overrides)
    if "Nt" in overrides:
        doc["Ns"] = min(doc["Nt"], doc["Nr"])
    sc = scenario.from_dict(doc)
    st = channel.deploy(sc)
    st.beta = channel.large_scale(st, sc)
    st.serve_mask, st.lue, st.kl = channel.cluster(st.beta, sc)
    return sc, overhead.compute_counts(sc, st, "scalable", True)


def reduction_pct(sc, counts):
    proposed = counts.proposed_e2_up_per_nrt + counts.proposed_e2_down_per_nrt
    crzf = (counts.crzf_e2_up_per_rt + counts.crzf_e2_down_per_rt) * sc.N_RT
    return 100.0 * (1.0 - proposed / crzf)


def test_criterion_07_e2_overhead():
    """Reduction vs C-RZF in [95, 99] at paper parameters; proposed counters
    constant across L_ue and Nt sweeps; Nt=8 reduction >= Nt=4."""
    sc, counts = paper_counts()
    red4 = reduction_pct(sc, counts)
    in_band = 95.0 <= red4 <= 99.0

    lue_counters = set()
    for l_ue in (4, 8, 12):
        _, c = paper_counts(L_ue=l_ue)
        lue_counters.add((c.proposed_e2_up_per_nrt, c.proposed_e2_down_per_nrt))
    nt_counters = set()
    red_by_nt = {}
    for nt in (2, 4, 8):
        sc_nt, c = paper_counts(Nt=nt)
        nt_counters.add((c.proposed_e2_up_per_nrt, c.proposed_e2_down_per_nrt))
        red_by_nt[nt] = reduction_pct(sc_nt, c)
    constant = len(lue_counters) == 1 and len(nt_counters) == 1
    nt_dir = red_by_nt[8] >= red_by_nt[4]

    # a short live run must book exactly these counters
    sim = orchestrator.Simulation(scenario.from_dict(paper_scale_doc()), mode="expert")
    sim.run(10)
    booked = sim.ledger.e2_up + sim.ledger.e2_down
    expected = counts.proposed_e2_up_per_nrt + counts.proposed_e2_down_per_nrt
    report(
        "7 E2 overhead",
        in_band and constant and nt_dir and booked == expected,
        f"reduction {red4:.2f}% (paper 97.66%), Nt=8 {red_by_nt[8]:.2f}%, counters constant={constant}",
    )


def test_criterion_08_qos_adaptation(desk):
    """Step R_min changes: the user's rate re-enters +-0.1 bits/s/Hz within
    60 RT loops and the multiplier's oscillation settles."""
    sc = desk.with_updates(
        v=tuple([0.0] * desk.K), delta=tuple([0.5] * desk.K), N_nRT=100, seed=3
    )
    warm = orchestrator.Simulation(sc, mode="expert")
    warm.run(80)
    rates = warm.rows[-1].rates
    k = int(np.argmin(rates))
    base_rate = rates[k]
    t1 = float(np.floor(base_rate) + 1.5)
    t2 = float(np.floor(base_rate) + 2.5)
    t3 = float(np.floor(base_rate) + 2.0)
    sched = [
        {"t": 100, "k": k, "r_min": t1},
        {"t": 220, "k": k, "r_min": t2},
        {"t": 340, "k": k, "r_min": t3},
    ]
    sim = orchestrator.Simulation(sc, mode="expert", rmin_schedule=sched)
    sim.run(460)
    rk = np.array([r.rates[k] for r in sim.rows])
    muk = np.array([r.mu[k] for r in sim.rows])
    details = []
    ok = True
    for start, tgt in ((100, t1), (220, t2), (340, t3)):
        entry = np.flatnonzero(np.abs(rk[start : start + 60] - tgt) <= 0.1)
        entered = len(entry) > 0
        amp_prev = muk[start + 80 : start + 100].max() - muk[start + 80 : start + 100].min()
        amp_last = muk[start + 100 : start + 120].max() - muk[start + 100 : start + 120].min()
        settled = amp_last <= max(amp_prev, 0.05)
        ok = ok and entered and settled
        details.append(
            f"target {tgt}: entry@{entry[0] if entered else 'never'}, amp {amp_prev:.3f}->{amp_last:.3f}"
        )
    report("8 QoS adaptation", ok, "; ".join(details))


def test_criterion_09_scheme_ordering(desk):
    """Mean tail aggregate: expert(full, U=1) >= expert(scalable, U=4) >=
    drl-wmmse and >= drzf on at least 8 of 10 seeds."""
    wins = 0
    for seed in range(1, 11):
        sc = desk.with_updates(seed=seed)
        tails = {}
        for label, mode, v_update, u in (
            ("full", "expert", "full", 1),
            ("scalable", "expert", "scalable", 4),
            ("drl", "drl-wmmse", "scalable", 4),
            ("drzf", "drzf", "scalable", 4),
        ):
            sim = orchestrator.Simulation(sc.with_updates(U=u), mode=mode, v_update=v_update)
            sim.run(150)
            tails[label] = float(np.mean([r.aggregate for r in sim.rows[75:]]))
        if tails["full"] >= tails["scalable"] >= tails["drl"] and tails["scalable"] >= tails["drzf"]:
            wins += 1
    report("9 scheme ordering", wins >= 8, f"{wins}/10 seeds ordered")


def test_criterion_10_determinism(desk, tmp_path):
    """Byte-identical runs from (config, seed, mode), including parallel
    per-O-DU execution."""
    import shutil

    cfg = tmp_path / "desk.json"
    shutil.copyfile(DESK_CONFIG, cfg)
    outputs = []
    for name, extra in (("r1", []), ("r2", []), ("r3", ["--parallel-odu"])):
        out = tmp_path / name
        rc = cli.main(
            [
                "run", "--config", str(cfg), "--mode", "expert", "--rt-loops", "60",
                "--seed", "7", "--out", str(out),
            ]
            + extra
        )
        assert rc == 0
        outputs.append((out / "metrics.csv").read_bytes())
    same = outputs[0] == outputs[1] == outputs[2]
    report("10 determinism", same, "3 runs byte-identical incl. parallel O-DU")


def test_criterion_11_imperfect_csi_monotonicity(desk):
    """Mean tail aggregate non-increasing over rho2 in {0, 0.01, 0.1} for
    every mode."""
    base = desk.with_updates(v=tuple([0.0] * desk.K))
    ok = True
    details = []
    for mode in ("expert", "crzf", "drzf", "drl-wmmse"):
        vals = []
        for rho2 in (0.0, 0.01, 0.1):
            sim = orchestrator.Simulation(base.with_updates(rho2=rho2), mode=mode)
            sim.run(240)
            vals.append(float(np.mean([r.aggregate for r in sim.rows[120:]])))
        mono = vals[0] >= vals[1] >= vals[2]
        ok = ok and mono
        details.append(f"{mode}: {[round(v, 1) for v in vals]}")
    report("11 imperfect-CSI monotonicity", ok, "; ".join(details))
