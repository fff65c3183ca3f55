"""Per-vehicle Thompson Sampling over the competitive set.

The agent learns the discrepancy between the centrally estimated rate and the
handover-corrected observed rate, then samples Gaussian scores whose spread
shrinks with experience.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError


@dataclass
class TsAgentState:
    n_arms: int
    alpha_ts: float = 1.0
    zeta: float = 0.1
    sigma_is_variance: bool = False
    prev_bs: int | None = None
    mu_ts: np.ndarray = field(init=False)
    n_ts: np.ndarray = field(init=False)

    def __post_init__(self):
        self.mu_ts = np.zeros(self.n_arms)
        self.n_ts = np.zeros(self.n_arms, dtype=np.int64)

    def sigma(self, j: int | np.ndarray) -> np.ndarray:
        s = self.alpha_ts / (self.n_ts[j] + 1.0)
        return np.sqrt(s) if self.sigma_is_variance else s


def predict_rate(state: TsAgentState, j: int, mu_ccucb: float, handover: bool) -> float:
    """Predicted data rate of arm j: learned rate minus learned discrepancy,
    derated on handover."""
    return (mu_ccucb - float(state.mu_ts[j])) * (1.0 - state.zeta * (1.0 if handover else 0.0))


def select_bs(
    state: TsAgentState,
    competitive: np.ndarray,
    mu_row: np.ndarray,
    rng: np.random.Generator,
) -> int:
    """Sample a Gaussian score per competitive arm and return the argmax
    (ties to the lowest arm id)."""
    arms = np.flatnonzero(np.asarray(competitive, dtype=bool))
    if arms.size == 0:
        raise ContractViolationError("competitive set must not be empty")
    handover = (state.prev_bs is not None) & (arms != (state.prev_bs if state.prev_bs is not None else -1))
    s = (mu_row[arms] - state.mu_ts[arms]) * (1.0 - state.zeta * handover)
    z = rng.normal(s, state.sigma(arms))
    return int(arms[np.argmax(z)])


def update_ts(
    state: TsAgentState,
    chosen: int,
    mu_ccucb_at_choice: float,
    observed_rate: float,
    handover: bool,
) -> None:
    """Record one discrepancy sample for the chosen arm and remember it as
    the previous BS."""
    derate = 1.0 - state.zeta * (1.0 if handover else 0.0)
    sample = mu_ccucb_at_choice - observed_rate / derate
    state.n_ts[chosen] += 1
    state.mu_ts[chosen] += (sample - state.mu_ts[chosen]) / state.n_ts[chosen]
    state.prev_bs = chosen
