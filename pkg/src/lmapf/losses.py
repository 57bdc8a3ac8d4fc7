"""Actor-critic, validity and imitation losses over recorded trajectories.

Values only: no gradients, no network. Every log uses a probability floor
of ``PROB_FLOOR``; results report whether the floor was hit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ParameterError
from .rules import N_ACTIONS, Action

PROB_FLOOR = 1e-10

# combination weights; not taken from any published setting
DEFAULT_WEIGHTS = (0.5, 1.0, 0.5)


@dataclass(frozen=True)
class LossConfig:
    gamma: float = 0.95
    entropy_weight: float = 0.01
    alpha: float = DEFAULT_WEIGHTS[0]
    beta: float = DEFAULT_WEIGHTS[1]
    zeta: float = DEFAULT_WEIGHTS[2]

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ParameterError("gamma must be in (0, 1]")
        if self.entropy_weight < 0:
            raise ParameterError("entropy_weight must be >= 0")


class LossValue(NamedTuple):
    value: float
    clamped: bool


@dataclass
class Trajectory:
    """One agent's steps. ``values`` has T+1 entries (last = bootstrap)."""

    policy: np.ndarray  # (T, 5) probabilities
    actions: np.ndarray  # (T,)
    rewards: np.ndarray  # (T,)
    values: np.ndarray  # (T + 1,)
    valid: np.ndarray  # (T, 5)
    expert: Optional[np.ndarray] = None  # (T,)
    logits: Optional[np.ndarray] = None  # (T, 5) validity-head pre-activations

    def __post_init__(self):
        self.policy = np.asarray(self.policy, dtype=np.float64).reshape(-1, N_ACTIONS)
        self.actions = np.asarray(self.actions, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        T = len(self.rewards)
        if T == 0:
            raise ParameterError("trajectory is empty")
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape == (T,):
            self.values = np.append(self.values, 0.0)
        self.valid = np.asarray(self.valid, dtype=np.float64).reshape(-1, N_ACTIONS)
        if self.expert is not None:
            self.expert = np.asarray(self.expert, dtype=np.int64)
        if self.logits is not None:
            self.logits = np.asarray(self.logits, dtype=np.float64).reshape(-1, N_ACTIONS)
        for name, arr in (("policy", self.policy), ("actions", self.actions), ("valid", self.valid)):
            if len(arr) != T:
                raise ParameterError(f"{name} has {len(arr)} steps, rewards has {T}")
        if self.values.shape != (T + 1,):
            raise ParameterError(f"values must have {T} or {T + 1} entries")
        if (self.policy < 0).any() or np.abs(self.policy.sum(axis=1) - 1.0).max() > 1e-9:
            raise ParameterError("each policy row must be a probability distribution")
        if ((self.actions < 0) | (self.actions >= N_ACTIONS)).any():
            raise ParameterError("action index out of range")

    def __len__(self):
        return len(self.rewards)


def discounted_returns(rewards: Sequence[float], gamma: float) -> np.ndarray:
    """``R_t = r_t + gamma * R_{t+1}``, computed backwards."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.size == 0:
        raise ParameterError("rewards must be nonempty")
    out = np.empty_like(r)
    acc = 0.0
    for t in range(len(r) - 1, -1, -1):
        acc = r[t] + gamma * acc
        out[t] = acc
    return out


def advantage(reward, value, next_value, gamma: float):
    """One-step bootstrapped advantage; works elementwise on arrays."""
    return reward + gamma * next_value - value


def advantages(traj: Trajectory, gamma: float) -> np.ndarray:
    return traj.rewards + gamma * traj.values[1:] - traj.values[:-1]


def value_loss(traj: Trajectory, gamma: float = 0.95) -> float:
    R = discounted_returns(traj.rewards, gamma)
    return float(np.mean((traj.values[:-1] - R) ** 2))


def entropy(pi: np.ndarray) -> np.ndarray:
    """Shannon entropy along the last axis (0 log 0 = 0)."""
    pi = np.asarray(pi, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pi > 0, pi * np.log(np.where(pi > 0, pi, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def _per_step_entropy_printed(pi: np.ndarray, actions: np.ndarray) -> np.ndarray:
    # literal form: pi(a_t) * sum_i log pi(a_i)
    logs = np.log(np.maximum(pi, PROB_FLOOR)).sum(axis=1)
    return pi[np.arange(len(actions)), actions] * logs


def actor_loss(traj: Trajectory, adv: Optional[Sequence[float]] = None, entropy_weight: float = 0.01,
               gamma: float = 0.95, printed_entropy: bool = False) -> LossValue:
    """``mean_t[ w * H(pi_t) - log pi_t(a_t) * A_t ]``.

    ``adv`` defaults to the one-step advantages. ``printed_entropy`` swaps
    H for the literal per-step factor ``pi_t(a_t) * sum_i log pi_t(a_i)``.
    """
    pi = traj.policy
    a = np.asarray(adv, dtype=np.float64) if adv is not None else advantages(traj, gamma)
    if a.shape != (len(traj),):
        raise ParameterError("one advantage per step required")
    chosen = pi[np.arange(len(traj)), traj.actions]
    clamped = bool((chosen < PROB_FLOOR).any())
    logp = np.log(np.maximum(chosen, PROB_FLOOR))
    h = _per_step_entropy_printed(pi, traj.actions) if printed_entropy else entropy(pi)
    return LossValue(float(np.mean(entropy_weight * h - logp * a)), clamped)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def valid_loss(traj: Trajectory, printed: bool = False) -> LossValue:
    """Binary cross-entropy of the validity head against ``traj.valid``.

    Uses ``sigmoid(logits)`` when logits are recorded, else the policy
    probabilities. ``printed`` evaluates the literal form with the validity
    bits inside the logs; it diverges (clamped) for any binary target.
    """
    q = _sigmoid(traj.logits) if traj.logits is not None else traj.policy
    v = traj.valid
    if printed:
        lo, hi = v, 1.0 - v
        w1, w0 = q, 1.0 - q
    else:
        lo, hi = q, 1.0 - q
        w1, w0 = v, 1.0 - v
    clamped = bool(((lo < PROB_FLOOR) & (w1 != 0)).any() or ((hi < PROB_FLOOR) & (w0 != 0)).any())
    s = w1 * np.log(np.maximum(lo, PROB_FLOOR)) + w0 * np.log(np.maximum(hi, PROB_FLOOR))
    return LossValue(float(-s.sum(axis=1).mean()), clamped)


def bc_loss(traj: Trajectory) -> LossValue:
    if traj.expert is None:
        raise ParameterError("trajectory has no expert actions")
    if traj.expert.shape != (len(traj),):
        raise ParameterError("one expert action per step required")
    p = traj.policy[np.arange(len(traj)), traj.expert]
    return LossValue(float(-np.mean(np.log(np.maximum(p, PROB_FLOOR)))), bool((p < PROB_FLOOR).any()))


def combined_loss(value: float, actor: float, valid: float, alpha: float = DEFAULT_WEIGHTS[0],
                  beta: float = DEFAULT_WEIGHTS[1], zeta: float = DEFAULT_WEIGHTS[2]) -> float:
    return alpha * value + beta * actor + zeta * valid


def evaluate(traj: Trajectory, config: LossConfig = LossConfig()) -> dict:
    """All losses for one trajectory, plus the weighted total."""
    lv = value_loss(traj, config.gamma)
    la = actor_loss(traj, None, config.entropy_weight, config.gamma)
    lva = valid_loss(traj)
    out = {
        "value": lv,
        "actor": la.value,
        "valid": lva.value,
        "total": combined_loss(lv, la.value, lva.value, config.alpha, config.beta, config.zeta),
        "clamped": la.clamped or lva.clamped,
        "steps": len(traj),
    }
    if traj.expert is not None:
        bc = bc_loss(traj)
        out["bc"] = bc.value
        out["clamped"] = out["clamped"] or bc.clamped
    return out


# -- loading --------------------------------------------------------------------

_ACTION_INDEX = {a.name: int(a) for a in Action}


def load_trajectories(events_path, side_path=None) -> dict[int, Trajectory]:
    """Per-agent trajectories from a JSON-lines event log.

    Each event needs ``t, agent, action, reward`` and, for the losses,
    ``distribution`` and ``valid``. Those two, plus ``value`` and ``expert``,
    may instead come from a JSON-lines side-file keyed by ``(t, agent)``.
    Missing values default to 0 and missing validity to all-valid.
    """
    side = {}
    if side_path is not None:
        for line in Path(side_path).read_text().splitlines():
            if line.strip():
                rec = json.loads(line)
                side[(int(rec["t"]), int(rec["agent"]))] = rec
    steps: dict[int, list[dict]] = {}
    for line in Path(events_path).read_text().splitlines():
        if not line.strip():
            continue
        ev = json.loads(line)
        ev = {**ev, **side.get((int(ev["t"]), int(ev["agent"])), {})}
        steps.setdefault(int(ev["agent"]), []).append(ev)
    out = {}
    for agent, evs in sorted(steps.items()):
        evs.sort(key=lambda e: e["t"])
        acts = [a if isinstance(a, int) else _ACTION_INDEX[a] for a in (e["action"] for e in evs)]
        if any("distribution" not in e for e in evs):
            raise ParameterError(f"agent {agent}: events lack action distributions")
        values = [float(e.get("value", 0.0)) for e in evs]
        values.append(float(evs[-1].get("bootstrap", 0.0)))
        expert = None
        if all("expert" in e for e in evs):
            expert = [e["expert"] if isinstance(e["expert"], int) else _ACTION_INDEX[e["expert"]] for e in evs]
        out[agent] = Trajectory(
            policy=[e["distribution"] for e in evs],
            actions=acts,
            rewards=[float(e["reward"]) for e in evs],
            values=values,
            valid=[e.get("valid", [1] * N_ACTIONS) for e in evs],
            expert=expert,
        )
    return out

