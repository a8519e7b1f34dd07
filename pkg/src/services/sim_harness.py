"""Coupled Monte Carlo comparison of the change-detection and mode-observing controllers.

Timing: the change point Gamma is the index of the first state drawn from the
post-change kernel, so the transition out of step t uses P2 iff t + 1 >= Gamma
and the stage cost charged at t is the expected cost of that same mode. The
mode-observing (MO) controller runs pi2 from t = Gamma on; the change-detection
(CD) controller runs pi2 from its stopping time tau on.

Both controllers consume one uniform per step. While their states and actions
coincide they perform the same arithmetic, so their costs agree bit for bit.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import replace

import numpy as np
import pandas as pd
from scipy import stats

from src.models.simulation import EpisodeRecord, SimReport
from src.services.mdp_core import horizon_cost_table, mode_chain
from src.services.qcd_solver import belief_update
from src.services.regret import approx_regret, stats_from_report
from src.utils.errors import ModelError, TruncationError

logger = logging.getLogger(__name__)

UNIFORM_BLOCK = 1024
TRUNCATION_LIMIT = 1e-4


def episode_rng(master_seed, index):
    """Independent stream for episode `index`, a pure function of (master_seed, index)."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, index]))


def sample_change_point(rho, rng):
    if not 0.0 < rho <= 1.0:
        raise ModelError(f"rho must lie in (0, 1], got {rho}")
    return int(rng.geometric(rho))


def _uniform_stream(rng):
    while True:
        yield from rng.random(UNIFORM_BLOCK)


def _inverse_cdf(cdf, u):
    return min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)


def _normalized_cdf(probabilities):
    cdf = np.cumsum(probabilities, axis=-1)
    return cdf / cdf[..., -1:]


class EpisodeSimulator:
    """Runs coupled episodes for one SwitchingSetup over a fixed horizon.

    `detection_only` follows the CD trajectory only until tau is known and
    records no costs. `oracle` replaces the threshold rule by a switch at
    Gamma. `regret_to_go` adds the regret-to-go estimate of each episode.
    """

    def __init__(self, setup, horizon, detection_only=False, oracle=False, regret_to_go=False):
        if horizon < 1:
            raise ModelError(f"horizon must be at least 1, got {horizon}")
        mdp = setup.mdp
        self.setup = setup
        self.horizon = horizon
        self.detection_only = detection_only
        self.oracle = oracle
        self.discount = mdp.discount
        self.dynamics = setup.dynamics
        self.initial_cdf = _normalized_cdf(setup.initial_dist)
        self.kernel_cdf = {mode: _normalized_cdf(mdp.kernel(mode)) for mode in (1, 2)}
        self.cost = {mode: mdp.cost(mode) for mode in (1, 2)}
        self.actions_pre = setup.policy_pre.action_of
        self.actions_post = setup.policy_post.action_of

        self.chains = None
        if regret_to_go:
            self.chains = {
                (i, j): mode_chain(mdp, policy, j)
                for i, policy in ((1, setup.policy_pre), (2, setup.policy_post))
                for j in (1, 2)
            }
            self.tail_table = horizon_cost_table(self.chains[(2, 2)], self.discount, horizon)

    def _triggers(self, t, p, x, change_point):
        if self.oracle:
            return t >= change_point
        return self.setup.rule.should_stop(p, x)

    def _step(self, mode, x, action, u):
        return _inverse_cdf(self.kernel_cdf[mode][x, action], u)

    def run(self, change_point, rng, index=0):
        setup = self.setup
        horizon = self.horizon
        x0 = _inverse_cdf(self.initial_cdf, rng.random())
        uniforms = _uniform_stream(rng)

        x_cd = x_mo = x0
        p = 0.0
        switch_time = None
        state_at_switch = state_at_change = None
        cost_cd = cost_mo = regret = 0.0
        delay_cost = overshoot = 0.0
        weight = 1.0

        for t in range(horizon):
            if t == change_point:
                state_at_change = x_cd
            if switch_time is None and self._triggers(t, p, x_cd, change_point):
                switch_time = t
                state_at_switch = x_cd
                if t < change_point:
                    overshoot += setup.lam
                if self.detection_only:
                    break

            mode = 2 if t + 1 >= change_point else 1
            u = next(uniforms)
            a_cd = self.actions_pre[x_cd] if switch_time is None else self.actions_post[x_cd]
            c_cd = self.cost[mode][x_cd, a_cd]
            next_cd = self._step(mode, x_cd, a_cd, u)

            if switch_time is None and t >= change_point:
                delay_cost += weight * c_cd
                overshoot += 1.0
            if not self.detection_only:
                a_mo = self.actions_pre[x_mo] if t < change_point else self.actions_post[x_mo]
                c_mo = self.cost[mode][x_mo, a_mo]
                next_mo = self._step(mode, x_mo, a_mo, u)
                cost_cd += weight * c_cd
                cost_mo += weight * c_mo
                regret += weight * (c_cd - c_mo)
                x_mo = next_mo

            if switch_time is None:
                p = belief_update(self.dynamics, x_cd, next_cd, p)
            x_cd = next_cd
            weight *= self.discount

        truncated = switch_time is None
        if truncated:
            switch_time = horizon
            state_at_switch = x_cd
            if horizon < change_point:
                overshoot += setup.lam

        false_alarm = switch_time < change_point
        delay = max(switch_time - change_point, 0)
        undershoot = max(change_point - switch_time, 0)
        to_go = math.nan
        if self.chains is not None:
            to_go = self._regret_to_go(switch_time, change_point, state_at_switch, state_at_change, delay_cost)

        if self.detection_only:
            cost_cd = cost_mo = regret = math.nan
        return EpisodeRecord(
            index=index,
            initial_state=int(x0),
            change_point=change_point,
            switch_time=switch_time,
            discounted_cost_cd=cost_cd,
            discounted_cost_mo=cost_mo,
            discounted_regret=regret,
            false_alarm=bool(false_alarm),
            delay=delay,
            undershoot=undershoot,
            overshoot_g=overshoot,
            truncated=truncated,
            regret_to_go=to_go,
        )

    def _schedule_values(self, head, budget):
        """Expected discounted cost of running the (chain, steps) segments in `head`, then M_{2|2}, for `budget` steps."""
        clipped = []
        for chain, steps in head:
            take = min(steps, budget)
            clipped.append((chain, take))
            budget -= take
        values = self.tail_table[budget]
        for chain, steps in reversed(clipped):
            for _ in range(steps):
                values = chain.cost_vec + self.discount * (chain.transition @ values)
        return values

    def _regret_to_go(self, tau, change_point, x_tau, x_change, delay_cost):
        horizon = self.horizon
        if tau >= horizon and change_point >= horizon:
            return 0.0
        if tau < change_point:
            pre_steps = change_point - 1 - tau
            budget = horizon - tau
            cd = self._schedule_values([(self.chains[(2, 1)], pre_steps)], budget)
            mo = self._schedule_values(
                [(self.chains[(1, 1)], pre_steps), (self.chains[(1, 2)], 1)], budget
            )
            return self.discount ** tau * float(cd[x_tau] - mo[x_tau])
        if change_point >= horizon:
            return 0.0
        cd_tail = self.discount ** tau * self.tail_table[horizon - tau][x_tau]
        mo_tail = self.discount ** change_point * self.tail_table[horizon - change_point][x_change]
        return float(delay_cost + cd_tail - mo_tail)


def run_episode(setup, change_point, horizon, rng, index=0, **options):
    return EpisodeSimulator(setup, horizon, **options).run(change_point, rng, index)


def simulate_indexed(simulator, master_seed, index):
    rng = episode_rng(master_seed, index)
    change_point = sample_change_point(simulator.setup.rho, rng)
    return simulator.run(change_point, rng, index)


def _simulate_chunk(args):
    """Worker entry point; module level so ProcessPoolExecutor can pickle it."""
    setup, horizon, options, master_seed, indices = args
    simulator = EpisodeSimulator(setup, horizon, **options)
    return [simulate_indexed(simulator, master_seed, index) for index in indices]


def _chunks(n_episodes, workers):
    n_chunks = max(1, min(n_episodes, workers * 4))
    return [chunk.tolist() for chunk in np.array_split(np.arange(n_episodes), n_chunks)]


def simulate_episodes(setup, n_episodes, horizon, master_seed, workers=1, **options):
    """Episode records in index order, identical for any worker count."""
    if n_episodes < 1:
        raise ModelError("no episodes requested")
    chunks = _chunks(n_episodes, workers)
    if workers <= 1:
        return _simulate_chunk((setup, horizon, options, master_seed, range(n_episodes)))

    results = {}
    with ProcessPoolExecutor(max_workers=workers) as executor:
        futures = {
            executor.submit(_simulate_chunk, (setup, horizon, options, master_seed, chunk)): i
            for i, chunk in enumerate(chunks)
        }
        for future in as_completed(futures):
            results[futures[future]] = future.result()
            logger.debug("chunk %d/%d done", len(results), len(chunks))
    return [record for i in range(len(chunks)) for record in results[i]]


def _mean_stderr(column):
    if column.size == 1:
        return float(column.iloc[0]), 0.0
    return float(column.mean()), float(column.sem())


def welch_statistic(sample_a, sample_b):
    """Welch t statistic and Welch-Satterthwaite degrees of freedom; nan when undefined."""
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.size < 2 or b.size < 2 or np.isnan(a).any() or np.isnan(b).any():
        return math.nan, math.nan
    va = a.var(ddof=1) / a.size
    vb = b.var(ddof=1) / b.size
    if va + vb == 0.0:
        return math.nan, math.nan
    t_stat = float(stats.ttest_ind(a, b, equal_var=False).statistic)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    return t_stat, float(df)


def truncation_bound(mdp, horizon):
    """gamma^H max|c| / (1 - gamma): the discounted cost left out past the horizon."""
    c_max = float(max(np.max(np.abs(mdp.cost(1))), np.max(np.abs(mdp.cost(2)))))
    return mdp.discount ** horizon * c_max / (1.0 - mdp.discount)


def summarize(setup, records, horizon, master_seed):
    frame = pd.DataFrame([record.to_dict() for record in records])
    n = len(frame)
    mean_cd, se_cd = _mean_stderr(frame["discounted_cost_cd"])
    mean_mo, se_mo = _mean_stderr(frame["discounted_cost_mo"])
    pfa, pfa_se = _mean_stderr(frame["false_alarm"].astype(float))
    mean_under, se_under = _mean_stderr(frame["undershoot"].astype(float))
    approx, approx_se = _mean_stderr(frame["overshoot_g"])
    exact, exact_se = _mean_stderr(frame["discounted_regret"])
    t_stat, t_df = welch_statistic(frame["discounted_cost_cd"], frame["discounted_cost_mo"])

    truncated_fraction = float(frame["truncated"].mean())
    if truncated_fraction > 0:
        logger.warning("%.2f%% of episodes never switched before H=%d", 100 * truncated_fraction, horizon)

    return SimReport(
        n_episodes=n,
        master_seed=master_seed,
        rho=setup.rho,
        lam=setup.lam,
        horizon=horizon,
        mean_cost_cd=mean_cd,
        stderr_cost_cd=se_cd,
        mean_cost_mo=mean_mo,
        stderr_cost_mo=se_mo,
        pfa=pfa,
        pfa_stderr=pfa_se,
        mean_delay=float(frame["delay"].mean()),
        mean_undershoot=mean_under,
        undershoot_stderr=se_under,
        approx_regret=approx,
        approx_regret_stderr=approx_se,
        mean_exact_regret=exact,
        exact_regret_stderr=exact_se,
        truncated_fraction=truncated_fraction,
        truncation_bound=truncation_bound(setup.mdp, horizon),
        t_stat=t_stat,
        t_df=t_df,
        episodes=tuple(records),
    )


def run_experiment(setup, n_episodes, horizon, master_seed, workers=1, keep_episodes=False, **options):
    """Simulate `n_episodes` coupled episodes and aggregate them in index order."""
    logger.info("simulating %d episodes (rho=%g, H=%d, seed=%d, workers=%d)",
                n_episodes, setup.rho, horizon, master_seed, workers)
    records = simulate_episodes(setup, n_episodes, horizon, master_seed, workers, **options)
    report = summarize(setup, records, horizon, master_seed)
    if not keep_episodes:
        report = replace(report, episodes=())
    return report


def estimate_approx_regret_empirical(report, lam, dp_value, slack=0.0):
    """Empirical E[(tau - Gamma)+] + lambda PFA and whether it matches the DP value.

    The flag is true when the gap is within three standard errors plus `slack`.
    """
    if report.truncated_fraction >= TRUNCATION_LIMIT:
        raise TruncationError(
            f"{report.truncated_fraction:.2%} of episodes hit the horizon H={report.horizon}; "
            f"increase the horizon"
        )
    value = approx_regret(stats_from_report(report), lam)
    consistent = abs(value - dp_value) <= 3.0 * report.approx_regret_stderr + slack
    return value, consistent


def estimate_exact_regret(setup, n_episodes, horizon, master_seed, workers=1, oracle=False):
    """Monte Carlo mean and standard error of sum_{t<H} gamma^t r_t over coupled episodes."""
    report = run_experiment(setup, n_episodes, horizon, master_seed, workers, oracle=oracle)
    return report.mean_exact_regret, report.exact_regret_stderr


def estimate_regret_to_go(setup, n_episodes, horizon, master_seed, workers=1):
    """Regret estimated as false-alarm plus delay regret-to-go, truncated at the horizon.

    Only the CD trajectory up to tau is simulated; what follows tau is replaced
    by its exact conditional expectation.
    """
    records = simulate_episodes(setup, n_episodes, horizon, master_seed, workers,
                                detection_only=True, regret_to_go=True)
    column = pd.Series([record.regret_to_go for record in records])
    return _mean_stderr(column)
