"""O-RAN multi-timescale loop engine.

RT loops: fading step, distributed per-O-DU precoding against the frozen
near-RT snapshot of foreign information, rate evaluation on true channels,
QoS dual ascent, ledger updates. Near-RT loops: observation gathering,
policy refresh (expert or external), one D2 exchange, E2 accounting,
reward emission. Non-RT loops are episodes: fading re-init, precoder and
dual re-init, experience flush.

Snapshot discipline: within one RT loop every O-DU sees foreign V/H
exactly as captured at the governing near-RT exchange, and O-DUs write
disjoint state, so per-O-DU updates can run on any schedule (or in
parallel) with bit-identical results.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines, channel, env_bridge, metrics, overhead, precoder
from .errors import ConfigError, InvariantViolationError
from .precoder import FilterWeightSet
from .providers import ExpertProvider
from .scenario import Scenario

_POWER_SLACK = 1e-9

WMMSE_MODES = ("expert", "agent", "drl-wmmse")
MODES = WMMSE_MODES + ("crzf", "drzf")


@dataclass
class MetricsRow:
    t: int
    n: int
    rates: np.ndarray
    aggregate: float
    min_rate: float
    mu: np.ndarray
    power: np.ndarray
    xi: np.ndarray
    e2_up: float
    e2_down: float
    d2: float
    ofh: float


@dataclass
class D2Cache:
    """Frozen cross-O-DU copies for one O-DU, stamped by near-RT loop."""

    h: dict = field(default_factory=dict)  # (i, j) -> H_hat[i, j] copy
    v: dict = field(default_factory=dict)  # (k, j) -> V[k, j] copy
    stamp: int = -1


class OduView:
    """What O-DU u can see: fresh local estimates and live local precoders,
    frozen foreign copies from the last D2 exchange."""

    def __init__(self, u, h_local, v_local, cache: D2Cache, odu_of_oru, lue):
        self._u = u
        self._h = h_local
        self._v = v_local
        self._cache = cache
        self._odu = odu_of_oru
        self.lue = lue

    def h(self, i, j):
        if self._odu[j] == self._u:
            return self._h[i, j]
        return self._cache.h.get((i, j))

    def v(self, k, j):
        if self._odu[j] == self._u:
            return self._v[k, j]
        return self._cache.v.get((k, j))


@dataclass
class Transition:
    n: int
    k: int
    obs: list
    act: dict
    reward: float
    next_obs: list


class Simulation:
    def __init__(
        self,
        sc: Scenario,
        mode: str,
        v_update: str = "scalable",
        provider=None,
        xi_model_file=None,
        rmin_schedule=None,
        parallel_odu: bool = False,
    ):
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
        if v_update not in ("full", "scalable"):
            raise ConfigError(f"v_update must be full|scalable, got {v_update!r}")
        self.sc = sc
        self.mode = mode
        self.v_update = v_update
        self.include_z = mode != "drl-wmmse"
        self.provider = provider if provider is not None else ExpertProvider()
        self.parallel_odu = parallel_odu
        self.xi_layers = (
            None if xi_model_file is None else precoder.load_xi_model(xi_model_file)
        )
        self.rmin_schedule = sorted(rmin_schedule or [], key=lambda e: e["t"])
        self._sched_pos = 0

        self.state = channel.build(sc, episode=0)
        self.counts = overhead.compute_counts(sc, self.state, v_update, self.include_z)
        self._d2_needs = (
            overhead.d2_needed_sets(sc, self.state, v_update)
            if self.include_z and sc.U > 1
            else None
        )
        self.ledger = overhead.OverheadLedger()
        self.r_min = np.array(sc.R_min, dtype=float)
        self.rows: list[MetricsRow] = []
        self.transitions: list[Transition] = []
        self.events: list[dict] = []

        self.t = 0
        self.episode = -1
        self._pending = dict(e2_up=0.0, e2_down=0.0, d2=0.0)
        self._caches = [D2Cache() for _ in range(sc.U)]
        self._period_rates: list[np.ndarray] = []
        self._prev_obs = None
        self._prev_act = None
        self._prev_n = None
        self._expert = ExpertProvider()
        self._init_episode()

    # -- episode / near-RT boundaries ------------------------------------

    def _init_episode(self):
        sc = self.sc
        self.episode += 1
        if self.episode > 0:
            channel.fading_init(self.state, sc, self.episode)
        self.V = precoder.init_matched_filter(
            self.state.H, self.state.lue, self.state.kl, sc.Pmax, sc.Ns
        )
        self.dual = precoder.initial_dual_state(sc.K, sc.L, sc.delta)
        self.xi_l = np.zeros(sc.L)
        self.fws: FilterWeightSet | None = None
        self._x = self._y = None
        self._period_rates = []
        self._prev_obs = None
        self._prev_act = None
        self._prev_n = None

    def _gather_obs(self):
        """Per-agent observation payloads: Xi_hat over I_k, bridge encoding."""
        xi_set = metrics.effective_channels(
            self.state.H_hat, self.V, self.state.serve_mask, self.sc.noise_power
        )
        obs = [
            env_bridge.encode_obs(k, xi_set, self.state.similar) for k in range(self.sc.K)
        ]
        return xi_set, obs

    def _reward_prev(self):
        if not self._period_rates:
            return None
        return np.mean(np.stack(self._period_rates), axis=0)

    def _near_rt_boundary(self, n):
        sc = self.sc
        if self.mode not in WMMSE_MODES:
            return
        xi_set, obs = self._gather_obs()
        reward = self._reward_prev()
        fws = self.provider.near_rt(n, xi_set, reward, self)
        if fws is None:
            fws = self._expert.near_rt(n, xi_set, reward, self)
            self.events.append({"t": self.t, "n": n, "event": "expert_fallback"})
        self.fws = fws
        self._x, self._y = precoder.xy_from_filters(fws.U, fws.W)
        act = [env_bridge.encode_act(fws.L_chol[k], fws.U[k]) for k in range(sc.K)]
        self.ledger.add(
            e2_up=self.counts.proposed_e2_up_per_nrt,
            e2_down=self.counts.proposed_e2_down_per_nrt,
        )
        self._pending["e2_up"] += self.counts.proposed_e2_up_per_nrt
        self._pending["e2_down"] += self.counts.proposed_e2_down_per_nrt
        self._d2_exchange(n)
        if reward is not None and self._prev_obs is not None:
            for k in range(sc.K):
                self.transitions.append(
                    Transition(
                        n=self._prev_n,
                        k=k,
                        obs=self._prev_obs[k],
                        act=self._prev_act[k],
                        reward=float(reward[k]),
                        next_obs=obs[k],
                    )
                )
        self._prev_obs = obs
        self._prev_act = act
        self._prev_n = n
        self._period_rates = []

    def _finalize_episode(self):
        """Close the trailing transition of a completed episode."""
        if self.mode not in WMMSE_MODES:
            return
        xi_set, obs = self._gather_obs()
        reward = self._reward_prev()
        if reward is not None and self._prev_obs is not None:
            for k in range(self.sc.K):
                self.transitions.append(
                    Transition(
                        n=self._prev_n,
                        k=k,
                        obs=self._prev_obs[k],
                        act=self._prev_act[k],
                        reward=float(reward[k]),
                        next_obs=obs[k],
                    )
                )
        self.provider.episode_end(self._next_n(), xi_set, reward, self)
        self._period_rates = []
        self._prev_obs = None

    def _d2_exchange(self, n):
        if self._d2_needs is None:
            return
        h_need, v_need = self._d2_needs
        for u in range(self.sc.U):
            cache = self._caches[u]
            cache.h = {(i, j): self.state.H_hat[i, j].copy() for (i, j) in h_need[u]}
            cache.v = {(k, j): self.V[k, j].copy() for (k, j) in v_need[u]}
            cache.stamp = n
        self.ledger.add(d2=self.counts.d2_per_nrt)
        self._pending["d2"] += self.counts.d2_per_nrt

    # -- RT loop ----------------------------------------------------------

    def _apply_schedule(self):
        while (
            self._sched_pos < len(self.rmin_schedule)
            and self.rmin_schedule[self._sched_pos]["t"] <= self.t
        ):
            entry = self.rmin_schedule[self._sched_pos]
            self.r_min[int(entry["k"])] = float(entry["r_min"])
            self._sched_pos += 1

    def _process_odu(self, u):
        sc = self.sc
        view = OduView(
            u, self.state.H_hat, self.V, self._caches[u], self.state.odu_of_oru, self.state.lue
        )
        for l in self.state.odu_orus[u]:
            users = self.state.kl[l]
            if not users:
                continue
            v_new, xi_l = precoder.oru_precoder_update(
                l,
                users,
                self.v_update if self.include_z else "full",
                self.dual.omega,
                view,
                self._x,
                self._y,
                sc.Pmax,
                include_z=self.include_z,
                xi_layers=self.xi_layers,
            )
            for k, v in v_new.items():
                self.V[k, l] = v
            self.xi_l[l] = xi_l

    def _precode_wmmse(self):
        if self.parallel_odu and self.sc.U > 1:
            with ThreadPoolExecutor(max_workers=self.sc.U) as pool:
                list(pool.map(self._process_odu, range(self.sc.U)))
        else:
            for u in range(self.sc.U):
                self._process_odu(u)

    def _check_power(self):
        sc = self.sc
        power = np.empty(sc.L)
        for l in range(sc.L):
            power[l] = precoder.oru_power(self.V, self.state.kl[l], l)
            if power[l] > sc.Pmax * (1.0 + _POWER_SLACK):
                raise InvariantViolationError(
                    f"O-RU {l} power {power[l]} exceeds budget {sc.Pmax} at t={self.t}"
                )
        return power

    def _rt_loop(self):
        sc = self.sc
        self._apply_schedule()
        channel.fading_step(self.state, sc, self.t)
        channel.corrupt_csi(self.state, sc, self.t)
        ofh = self.counts.ofh_up_per_rt + self.counts.ofh_down_per_rt
        if self.mode in WMMSE_MODES:
            self._precode_wmmse()
            ofh += self.counts.mu_feedback_per_rt
        elif self.mode == "crzf":
            self.V = baselines.crzf(
                self.state.H_hat,
                self.state.serve_mask,
                self.state.kl,
                sc.rzf_lambda_eff,
                sc.Pmax,
                sc.Ns,
            )
            self.ledger.add(
                e2_up=self.counts.crzf_e2_up_per_rt, e2_down=self.counts.crzf_e2_down_per_rt
            )
            self._pending["e2_up"] += self.counts.crzf_e2_up_per_rt
            self._pending["e2_down"] += self.counts.crzf_e2_down_per_rt
        else:  # drzf
            self.V = baselines.drzf(
                self.state.H_hat, self.state.kl, sc.rzf_lambda_eff, sc.Pmax, sc.Ns
            )
        power = self._check_power()
        rates, aggregate, min_rate = metrics.rate_report(
            self.state.H, self.V, self.state.serve_mask, sc.noise_power
        )
        if self.mode in WMMSE_MODES:
            self.dual = precoder.dual_ascent_mu(self.dual, rates, self.r_min)
            self._period_rates.append(rates)
        self.ledger.add(ofh=ofh)
        self.rows.append(
            MetricsRow(
                t=self.t,
                n=self.t // sc.N_RT,
                rates=rates,
                aggregate=aggregate,
                min_rate=min_rate,
                mu=self.dual.mu.copy(),
                power=power,
                xi=self.xi_l.copy(),
                e2_up=self._pending["e2_up"],
                e2_down=self._pending["e2_down"],
                d2=self._pending["d2"],
                ofh=ofh,
            )
        )
        self._pending = dict(e2_up=0.0, e2_down=0.0, d2=0.0)
        self.t += 1

    def _next_n(self):
        return self.t // self.sc.N_RT

    # -- public drivers ---------------------------------------------------

    def step(self):
        """Advance exactly one RT loop, crossing any due boundaries."""
        sc = self.sc
        per_episode = sc.N_RT * sc.N_nRT
        if self.episode < self.t // per_episode:
            self._finalize_episode()
            self._init_episode()
        if self.t % sc.N_RT == 0:
            self._near_rt_boundary(self._next_n())
        self._rt_loop()

    def run(self, rt_loops: int):
        for _ in range(rt_loops):
            self.step()
        return self

    def run_episode(self):
        """One non-RT loop: N_nRT near-RT periods plus episode finalization."""
        per_episode = self.sc.N_RT * self.sc.N_nRT
        if self.t % per_episode != 0:
            raise ConfigError("run_episode must start at an episode boundary")
        for _ in range(per_episode):
            self.step()
        self._finalize_episode()
        self._init_episode()
        return self

    def reward_sums(self):
        out = np.zeros(self.sc.K)
        for tr in self.transitions:
            out[tr.k] += tr.reward
        return out
