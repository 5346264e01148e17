"""Closed-form procurement contract solvers for both information regimes.

The server buys expected model improvement q from each client in exchange
for a transfer r. Under complete information the client's efficiency theta
is observable and the server extracts the full surplus; under incomplete
information the transfer includes an information rent and output is
distorted downward for all types below the top.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Regime(Enum):
    COMPLETE = "complete"
    INCOMPLETE = "incomplete"


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"efficiency theta must lie in [0, 1], got {theta}")


def _check_delta(delta: float) -> None:
    if delta <= 0.0:
        raise ValueError(f"cost sensitivity delta must be positive, got {delta}")


@dataclass(frozen=True)
class MarketParams:
    """Market-level constants: valuation slope, cost shape, population sizes."""

    lam: float
    delta: float
    n_clients: int
    k_select: int
    regime: Regime = Regime.COMPLETE

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        _check_delta(self.delta)
        if self.n_clients < 1:
            raise ValueError("n_clients must be a positive integer")
        if not 1 <= self.k_select <= self.n_clients:
            raise ValueError("k_select must satisfy 1 <= k_select <= n_clients")


@dataclass(frozen=True)
class Contract:
    """Output-transfer pair offered to a client."""

    q: float
    r: float

    def __post_init__(self):
        if self.q < 0.0 or self.r < 0.0:
            raise ValueError("contract terms must be nonnegative")


@dataclass(frozen=True)
class IcDiagnostic:
    """Utility comparison between a truthful report and one misreport."""

    true_theta: float
    reported_theta: float
    truthful_utility: float
    misreport_utility: float
    violation: float


def cost(q: float, theta: float, delta: float) -> float:
    """Client's cost of producing output q: q^2 / (1 + delta * theta)."""
    _check_theta(theta)
    _check_delta(delta)
    if q < 0.0:
        raise ValueError(f"output q must be nonnegative, got {q}")
    return q * q / (1.0 + delta * theta)


def client_utility(contract: Contract, theta: float, delta: float) -> float:
    """Quasi-linear client payoff: transfer minus production cost."""
    return contract.r - cost(contract.q, theta, delta)


def server_value(q: float, lam: float) -> float:
    """Server's valuation of output q, linear with slope lambda."""
    return lam * q


def server_utility_per_client(contract: Contract, params: MarketParams) -> float:
    """Server's net payoff from one contract: lambda * q - r."""
    return params.lam * contract.q - contract.r


def solve_complete(theta: float, params: MarketParams) -> Contract:
    """Optimal contract when theta is observable.

    Output equates marginal benefit with marginal cost, and the transfer
    exactly reimburses cost, so the client keeps zero surplus.
    """
    _check_theta(theta)
    denom = 1.0 + params.delta * theta
    q = params.lam * denom / 2.0
    r = q * q / denom
    return Contract(q, r)


def information_rent(theta: float, q: float, delta: float) -> float:
    """Extra payment above cost needed to elicit the client's type.

    Equals (1 - theta) * delta * q^2 / (1 + delta*theta)^2; zero at the
    top type theta = 1.
    """
    _check_theta(theta)
    _check_delta(delta)
    if q < 0.0:
        raise ValueError(f"output q must be nonnegative, got {q}")
    denom = 1.0 + delta * theta
    return (1.0 - theta) * delta * q * q / (denom * denom)


def solve_incomplete(theta: float, params: MarketParams) -> Contract:
    """Optimal contract when theta is private to the client.

    Output solves the marginal-virtual-cost condition
        lambda = 2q/(1+delta*theta) + (1-theta) * 2*delta*q/(1+delta*theta)^2,
    giving q = lambda*(1+delta*theta)^2 / (2(1+delta*theta) + 2*delta*(1-theta)).
    The transfer covers cost plus the information rent.
    """
    _check_theta(theta)
    d = params.delta
    a = 1.0 + d * theta
    q = params.lam * a * a / (2.0 * a + 2.0 * d * (1.0 - theta))
    r = cost(q, theta, d) + information_rent(theta, q, d)
    return Contract(q, r)


def ic_diagnostic(
    true_theta: float, reported_grid: list[float], params: MarketParams
) -> list[IcDiagnostic]:
    """Measure how much a client could gain by misreporting its type.

    For each reported theta-hat, the client of type true_theta is assigned
    the incomplete-information contract solved for theta-hat. This is a
    measurement tool: it records violations, it does not assert they are
    zero.
    """
    if not reported_grid:
        raise ValueError("reported_grid must be non-empty")
    truthful = client_utility(
        solve_incomplete(true_theta, params), true_theta, params.delta
    )
    out = []
    for reported in reported_grid:
        contract = solve_incomplete(reported, params)
        misreport = client_utility(contract, true_theta, params.delta)
        out.append(
            IcDiagnostic(
                true_theta=true_theta,
                reported_theta=reported,
                truthful_utility=truthful,
                misreport_utility=misreport,
                violation=max(0.0, misreport - truthful),
            )
        )
    return out
