"""Round orchestration for the buyers'-market auction, plus baselines.

Each round: offer regime-appropriate contracts, filter by the clients'
participation condition, select the top-k accepted clients by
ledger-verified reputation, run one federated-learning aggregation round,
score realized contributions with the Banzhaf index, and append updated
reputations to the ledger.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

import numpy as np

from .flsim import (
    AggregationConfig,
    ModelParams,
    PoisonConfig,
    SyntheticDataset,
    aggregate,
    evaluate_accuracy,
    init_model,
    local_train,
    poison,
)
from .ledger import HashChainLedger, PlainStore, UnknownClientError
from .mechanism import (
    Contract,
    MarketParams,
    Regime,
    client_utility,
    cost,
    solve_complete,
    solve_incomplete,
)
from .reputation import (
    ReputationParams,
    ReputationState,
    additive_utility,
    banzhaf_exact,
    banzhaf_mc,
    update_reputation,
)

# Selected sets of at most this size use exact Banzhaf enumeration; larger
# sets fall back to the Monte Carlo estimator (exact anyway for the
# additive per-client values used here).
EXACT_COALITION_LIMIT = 10
MC_SAMPLES = 64

TRUST_ZERO = "zero"
TRUST_LAST_VALID = "last_valid"


@dataclass
class ClientProfile:
    id: int
    theta: float
    dataset: SyntheticDataset
    poison_cfg: PoisonConfig | None = None  # None means honest

    @property
    def honest(self) -> bool:
        return self.poison_cfg is None


@dataclass(frozen=True)
class Bid:
    client_id: int
    price: float

    def __post_init__(self):
        if self.price < 0.0:
            raise ValueError("bid price must be nonnegative")


@dataclass
class RoundReport:
    round: int
    mechanism: str
    selected: list[int]
    contracts: dict[int, Contract]
    realized_q: dict[int, float]
    payments: dict[int, float]
    server_utility: float
    client_utilities: dict[int, float]
    accuracy_global: float | None = None


@dataclass
class SimulationState:
    """Mutable cross-round state: global model, ledger, Scaffold variates."""

    agg: AggregationConfig
    test: SyntheticDataset
    ledger: HashChainLedger | PlainStore = field(default_factory=HashChainLedger)
    rep_params: ReputationParams = field(default_factory=ReputationParams)
    model: ModelParams = field(default_factory=init_model)
    trust_policy: str = TRUST_LAST_VALID
    round: int = 0


def _mix(seed: int, round_num: int, salt: int) -> int:
    return (seed * 1_000_003 + round_num * 10_007 + salt) % (1 << 63)


def realized_value(q_hat: float, theta: float, params: MarketParams) -> float:
    """Server surplus from a realized output, valued at production cost.

    Defined for negative realized output (poisoned clients) and identical
    across information regimes, so reputation trajectories do not depend on
    the pricing regime.
    """
    return params.lam * q_hat - q_hat * q_hat / (1.0 + params.delta * theta)


def ledger_epsilon(store, client_id: int, policy: str = TRUST_LAST_VALID) -> float:
    """Reputation as seen through the store, applying the tamper policy.

    Unknown clients score 0. On the chained store a tampered record is
    rejected; policy "last_valid" then falls back to the most recent record
    that still verifies, policy "zero" treats the client as reputationless.
    """
    try:
        eps, trusted = store.read_reputation(client_id)
    except UnknownClientError:
        return 0.0
    if trusted:
        return eps
    if policy == TRUST_LAST_VALID and isinstance(store, HashChainLedger):
        fallback = store.read_last_valid(client_id)
        return fallback if fallback is not None else 0.0
    return 0.0


def _banzhaf_contributions(
    values: dict[int, float], seed: int, round_num: int
) -> dict[int, float]:
    ids = sorted(values)
    n = len(ids)
    pos_values = {p: values[i] for p, i in enumerate(ids)}
    utility = additive_utility(pos_values)
    zetas = {}
    for p, i in enumerate(ids):
        if n <= EXACT_COALITION_LIMIT:
            zetas[i] = banzhaf_exact(utility, n, p)
        else:
            zetas[i] = banzhaf_mc(
                utility, n, p, samples=MC_SAMPLES, seed=_mix(seed, round_num, 7000 + p)
            )
    return zetas


def run_round(
    population: list[ClientProfile],
    params: MarketParams,
    state: SimulationState,
    seed: int,
) -> RoundReport:
    """One full auction + training + reputation round."""
    if not population:
        raise ValueError("population must be non-empty")
    solve = solve_complete if params.regime is Regime.COMPLETE else solve_incomplete
    contracts = {c.id: solve(c.theta, params) for c in population}
    utilities = {
        c.id: client_utility(contracts[c.id], c.theta, params.delta) for c in population
    }
    accepted = [c for c in population if utilities[c.id] >= 0.0]
    if not accepted:
        raise RuntimeError("no client accepted its contract")

    eps_prev = {
        c.id: ledger_epsilon(state.ledger, c.id, state.trust_policy) for c in accepted
    }
    k = min(params.k_select, len(accepted))
    selected = select_top_k_by_reputation(eps_prev, k)

    # Every accepted client trains a candidate local model and is scored;
    # only the selected top-k are aggregated into the global model and paid.
    by_id = {c.id: c for c in population}
    local_models = {}
    for client in accepted:
        data = client.dataset
        if client.poison_cfg is not None:
            data = poison(data, client.poison_cfg, seed=_mix(seed, state.round, client.id))
        local_models[client.id] = local_train(state.model, data, state.agg)
    new_global = aggregate(
        [local_models[i] for i in selected],
        [len(by_id[i].dataset) for i in selected],
        state.agg,
    )
    acc_global = evaluate_accuracy(new_global, state.test)
    # Contributions are measured against the model the clients started
    # from, so the per-round improvement signal stays attributable.
    acc_reference = evaluate_accuracy(state.model, state.test)
    realized = {
        i: evaluate_accuracy(m, state.test) - acc_reference
        for i, m in local_models.items()
    }

    values = {
        i: realized_value(realized[i], by_id[i].theta, params) for i in local_models
    }
    zetas = _banzhaf_contributions(values, seed, state.round)
    for i in sorted(zetas):
        new_eps = update_reputation(eps_prev[i], zetas[i], state.rep_params)
        state.ledger.append(state.round, i, zetas[i], new_eps)

    report = RoundReport(
        round=state.round,
        mechanism=f"ours-{params.regime.value}",
        selected=selected,
        contracts=contracts,
        realized_q=realized,
        payments={i: contracts[i].r for i in selected},
        server_utility=sum(
            params.lam * contracts[i].q - contracts[i].r for i in selected
        ),
        client_utilities={i: utilities[i] for i in selected},
        accuracy_global=acc_global,
    )
    state.model = new_global
    state.round += 1
    return report


def select_top_k_by_reputation(epsilons: dict[int, float], k: int) -> list[int]:
    state = ReputationState(epsilon=dict(epsilons))
    from .reputation import select_top_k

    return select_top_k(state, k)


def _check_bids(population: list[ClientProfile], bids: list[Bid], k: int) -> None:
    bid_ids = {b.client_id for b in bids}
    missing = {c.id for c in population} - bid_ids
    if missing:
        raise ValueError(f"bids missing for clients {sorted(missing)}")
    if k > len(bids):
        raise ValueError(f"cannot select {k} winners from {len(bids)} bids")


def _baseline_report(
    mechanism: str,
    round_num: int,
    population: list[ClientProfile],
    winners: list[int],
    prices: dict[int, float],
    target_q: float,
    params: MarketParams,
) -> RoundReport:
    thetas = {c.id: c.theta for c in population}
    return RoundReport(
        round=round_num,
        mechanism=mechanism,
        selected=winners,
        contracts={i: Contract(target_q, prices[i]) for i in winners},
        realized_q={i: target_q for i in winners},
        payments={i: prices[i] for i in winners},
        server_utility=sum(params.lam * target_q - prices[i] for i in winners),
        client_utilities={
            i: prices[i] - cost(target_q, thetas[i], params.delta) for i in winners
        },
    )


def baseline_price_first(
    population: list[ClientProfile],
    bids: list[Bid],
    k: int,
    target_q: float,
    params: MarketParams,
    round_num: int = 0,
) -> RoundReport:
    """Pay-as-bid reverse auction: the k cheapest bids win."""
    _check_bids(population, bids, k)
    ranked = sorted(bids, key=lambda b: (b.price, b.client_id))
    winners = [b.client_id for b in ranked[:k]]
    prices = {b.client_id: b.price for b in bids}
    return _baseline_report(
        "price-first", round_num, population, winners, prices, target_q, params
    )


def baseline_randomized(
    population: list[ClientProfile],
    bids: list[Bid],
    k: int,
    seed: int,
    target_q: float,
    params: MarketParams,
    round_num: int = 0,
) -> RoundReport:
    """Uniformly random winner set, paid their bids."""
    _check_bids(population, bids, k)
    rng = np.random.default_rng(seed)
    ids = sorted(b.client_id for b in bids)
    winners = sorted(rng.choice(ids, size=k, replace=False).tolist())
    prices = {b.client_id: b.price for b in bids}
    return _baseline_report(
        "randomized", round_num, population, winners, prices, target_q, params
    )


def make_bids(
    population: list[ClientProfile], target_q: float, delta: float, rng
) -> list[Bid]:
    """Cost-anchored bids: true cost at the target output times a margin
    drawn uniformly from [1.0, 1.3] per client."""
    return [
        Bid(c.id, cost(target_q, c.theta, delta) * (1.0 + 0.3 * rng.random()))
        for c in population
    ]


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------

MECHANISMS = ("ours-complete", "ours-incomplete", "price-first", "randomized")


def build_population(config, seed: int) -> tuple[list[ClientProfile], SyntheticDataset]:
    """Deterministic population for one experiment seed.

    Efficiencies are uniform on [theta_min, theta_max]; the first
    poison_count clients are label-flipping poisoners.
    """
    from .flsim import generate_population

    rng = np.random.default_rng(seed)
    thetas = (
        config.theta_min
        + (config.theta_max - config.theta_min) * rng.random(config.n_clients)
    ).tolist()
    datasets, test = generate_population(config.n_clients, thetas, seed)
    profiles = []
    for i, (theta, data) in enumerate(zip(thetas, datasets)):
        pcfg = (
            PoisonConfig(config.poison_flip_rate) if i < config.poison_count else None
        )
        profiles.append(ClientProfile(i, theta, data, pcfg))
    return profiles, test


def _make_store(mode: str):
    if mode == "chained":
        return HashChainLedger()
    if mode == "vulnerable":
        return PlainStore()
    raise ValueError(f"unknown ledger mode {mode!r}")


def _make_agg(config) -> AggregationConfig:
    return AggregationConfig(
        algo=config.aggregation,
        local_epochs=config.local_epochs,
        learning_rate=config.learning_rate,
        prox_mu=config.prox_mu,
    )


def _fresh_state(config, test: SyntheticDataset, ledger_mode: str = "chained") -> SimulationState:
    return SimulationState(
        agg=_make_agg(config),
        test=test,
        ledger=_make_store(ledger_mode),
        rep_params=ReputationParams(config.w1, config.w2),
        trust_policy=config.trust_policy,
    )


def _ours_regime(mechanism: str) -> Regime:
    return Regime.COMPLETE if mechanism == "ours-complete" else Regime.INCOMPLETE


def _target_q(population: list[ClientProfile], config) -> float:
    params = MarketParams(config.lam, config.delta, len(population), 1)
    return statistics.median(solve_complete(c.theta, params).q for c in population)


def run_cell(
    config, mechanism: str, k: int, seed: int, ledger_mode: str = "chained",
    tamper_cfg=None,
) -> list[RoundReport]:
    """All rounds of one (mechanism, k, seed) experiment cell."""
    from .ledger import tamper_attack

    population, test = build_population(config, seed)
    if mechanism in ("ours-complete", "ours-incomplete"):
        params = MarketParams(
            config.lam, config.delta, config.n_clients, k, _ours_regime(mechanism)
        )
        state = _fresh_state(config, test, ledger_mode)
        reports = []
        for _ in range(config.rounds):
            reports.append(run_round(population, params, state, seed))
            if tamper_cfg is not None and len(state.ledger.records) > 0:
                tamper_attack(state.ledger, tamper_cfg)
        return reports
    if mechanism in ("price-first", "randomized"):
        params = MarketParams(config.lam, config.delta, config.n_clients, k)
        target_q = _target_q(population, config)
        reports = []
        for r in range(config.rounds):
            rng = np.random.default_rng((seed, r))
            bids = make_bids(population, target_q, config.delta, rng)
            if mechanism == "price-first":
                reports.append(
                    baseline_price_first(population, bids, k, target_q, params, r)
                )
            else:
                reports.append(
                    baseline_randomized(
                        population, bids, k, _mix(seed, r, 99), target_q, params, r
                    )
                )
        return reports
    raise ValueError(f"unknown mechanism {mechanism!r}")


def run_experiment(config) -> tuple[list[dict], list[dict]]:
    """Full mechanism-comparison grid.

    Returns per-round rows and a summary with mean and population-std of
    total server utility per (mechanism, k) over the config's seeds.
    """
    if config.rounds == 0:
        return [], []
    round_rows, summary = [], []
    for k in config.k_values:
        for mechanism in config.mechanisms:
            totals = []
            for seed in config.seeds:
                reports = run_cell(config, mechanism, k, seed)
                totals.append(sum(rep.server_utility for rep in reports))
                for rep in reports:
                    round_rows.append(
                        {
                            "mechanism": mechanism,
                            "k": k,
                            "seed": seed,
                            "round": rep.round,
                            "server_utility": rep.server_utility,
                            "accuracy": rep.accuracy_global,
                            "n_selected": len(rep.selected),
                        }
                    )
            summary.append(
                {
                    "mechanism": mechanism,
                    "k": k,
                    "mean_utility": statistics.fmean(totals),
                    "std_utility": statistics.pstdev(totals) if len(totals) > 1 else 0.0,
                }
            )
    return round_rows, summary


def run_reputation_trace(config, seed: int) -> list[dict]:
    """Per-round reputation of every client, for trajectory plots."""
    population, test = build_population(config, seed)
    params = MarketParams(
        config.lam,
        config.delta,
        config.n_clients,
        config.k_values[0],
        _ours_regime(config.mechanisms_ours()[0]),
    )
    state = _fresh_state(config, test)
    rows = []
    for _ in range(config.rounds):
        run_round(population, params, state, seed)
        for c in population:
            rows.append(
                {
                    "round": state.round - 1,
                    "client": c.id,
                    "epsilon": ledger_epsilon(state.ledger, c.id, state.trust_policy),
                    "behavior": "honest" if c.honest else "poisoner",
                }
            )
    return rows


def run_robustness(config) -> list[dict]:
    """Tamper-robustness grid: mean total server utility per
    (alpha, beta, ledger_mode) cell over the config's seeds."""
    from .ledger import TamperConfig

    rows = []
    mechanism = config.mechanisms_ours()[0]
    k = config.k_values[0]
    for alpha in config.tamper_alphas:
        for beta in config.tamper_betas:
            for mode in config.ledger_modes:
                totals = []
                for seed in config.seeds:
                    reports = run_cell(
                        config,
                        mechanism,
                        k,
                        seed,
                        ledger_mode=mode,
                        tamper_cfg=TamperConfig(alpha, beta, seed),
                    )
                    totals.append(sum(rep.server_utility for rep in reports))
                rows.append(
                    {
                        "alpha": alpha,
                        "beta": beta,
                        "ledger_mode": mode,
                        "mean_utility": statistics.fmean(totals),
                    }
                )
    return rows
