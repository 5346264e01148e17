"""Flat key-value experiment configuration with typed validation."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields

from .flsim import Aggregator


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    n_clients: int = 10
    k_values: list[int] = field(default_factory=lambda: [3])
    rounds: int = 5
    seeds: list[int] = field(default_factory=lambda: [0])
    lam: float = 1.0
    delta: float = 2.0
    mechanisms: list[str] = field(
        default_factory=lambda: [
            "ours-complete",
            "ours-incomplete",
            "price-first",
            "randomized",
        ]
    )
    aggregation: Aggregator = Aggregator.FEDAVG
    local_epochs: int = 3
    learning_rate: float = 0.5
    prox_mu: float = 0.01
    w1: float = 0.5
    w2: float = 0.5
    theta_min: float = 0.0
    theta_max: float = 1.0
    poison_count: int = 0
    poison_flip_rate: float = 0.8
    tamper_alphas: list[float] = field(default_factory=list)
    tamper_betas: list[float] = field(default_factory=list)
    ledger_modes: list[str] = field(default_factory=lambda: ["chained"])
    trust_policy: str = "last_valid"
    output_dir: str = "out"

    def mechanisms_ours(self) -> list[str]:
        ours = [m for m in self.mechanisms if m.startswith("ours-")]
        return ours or ["ours-complete"]

    def validate(self) -> None:
        if self.n_clients < 1:
            raise ConfigError("n_clients must be a positive integer")
        for k in self.k_values:
            if not 1 <= k <= self.n_clients:
                raise ConfigError("k_select must satisfy k_select <= n_clients")
        if self.rounds < 0:
            raise ConfigError("rounds must be nonnegative")
        if self.lam <= 0:
            raise ConfigError("lambda must be positive")
        if self.delta <= 0:
            raise ConfigError("delta must be positive")
        if not (0.0 <= self.w1 <= 1.0 and 0.0 <= self.w2 <= 1.0):
            raise ConfigError("reputation weights must lie in [0, 1]")
        if abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ConfigError("reputation weights must satisfy w1 + w2 = 1")
        if not 0.0 <= self.theta_min <= self.theta_max <= 1.0:
            raise ConfigError("theta range must satisfy 0 <= theta_min <= theta_max <= 1")
        if not 0 <= self.poison_count <= self.n_clients:
            raise ConfigError("poison_count must satisfy 0 <= poison_count <= n_clients")
        if not 0.0 <= self.poison_flip_rate <= 1.0:
            raise ConfigError("poison_flip_rate must lie in [0, 1]")
        for alpha in self.tamper_alphas:
            if not 0.0 <= alpha <= 1.0:
                raise ConfigError("tamper alpha must lie in [0, 1]")
        for beta in self.tamper_betas:
            if beta <= 0.0:
                raise ConfigError("tamper beta must be positive")
        for mode in self.ledger_modes:
            if mode not in ("chained", "vulnerable"):
                raise ConfigError(f"unknown ledger mode {mode!r}")
        if self.trust_policy not in ("zero", "last_valid"):
            raise ConfigError(f"unknown trust policy {self.trust_policy!r}")
        known = {m for m in self.mechanisms}
        bad = known - {"ours-complete", "ours-incomplete", "price-first", "randomized"}
        if bad:
            raise ConfigError(f"unknown mechanisms {sorted(bad)}")

    def digest(self) -> str:
        """Short hash of the effective configuration, for output provenance."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Aggregator):
                value = value.value
            lines.append(f"{f.name}={value}")
        return hashlib.sha256("\n".join(lines).encode()).hexdigest()[:12]


def _parse_int_list(raw: str) -> list[int]:
    return [int(tok) for tok in raw.split(",") if tok.strip()]


def _parse_float_list(raw: str) -> list[float]:
    return [float(tok) for tok in raw.split(",") if tok.strip()]


def _parse_str_list(raw: str) -> list[str]:
    return [tok.strip() for tok in raw.split(",") if tok.strip()]


_PARSERS = {
    "n_clients": ("n_clients", int),
    "k_select": ("k_values", _parse_int_list),
    "rounds": ("rounds", int),
    "seeds": ("seeds", _parse_int_list),
    "lambda": ("lam", float),
    "delta": ("delta", float),
    "mechanisms": ("mechanisms", _parse_str_list),
    "aggregation": ("aggregation", Aggregator),
    "local_epochs": ("local_epochs", int),
    "learning_rate": ("learning_rate", float),
    "prox_mu": ("prox_mu", float),
    "w1": ("w1", float),
    "w2": ("w2", float),
    "theta_min": ("theta_min", float),
    "theta_max": ("theta_max", float),
    "poison_count": ("poison_count", int),
    "poison_flip_rate": ("poison_flip_rate", float),
    "tamper_alphas": ("tamper_alphas", _parse_float_list),
    "tamper_betas": ("tamper_betas", _parse_float_list),
    "ledger_modes": ("ledger_modes", _parse_str_list),
    "trust_policy": ("trust_policy", str),
    "output_dir": ("output_dir", str),
}


def parse_config(path) -> ExperimentConfig:
    """Parse and validate a flat "key = value" config file."""
    config = ExperimentConfig()
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in _PARSERS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            attr, parser = _PARSERS[key]
            try:
                setattr(config, attr, parser(raw))
            except (ValueError, KeyError) as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    config.validate()
    return config
