"""Python access to the envforge core: rewards, the wire protocol parser,
group advantages and the analytics reports."""

import json

from ._envforge import (
    ContractError,
    Error,
    ParseError,
    ValidationError,
    advantage_weighted_log_likelihood,
    classify_success,
    concurrent_device_cost,
    format_reward_line,
    grpo_advantages,
    parse_reward_stream,
    policy_gradient,
    weighted_reward,
)
from . import _envforge

__all__ = [
    "ContractError",
    "Error",
    "ParseError",
    "ValidationError",
    "advantage_weighted_log_likelihood",
    "classify_success",
    "concurrent_device_cost",
    "epoch_cost",
    "format_reward_line",
    "grpo_advantages",
    "length_distribution",
    "parse_reward_stream",
    "policy_gradient",
    "reward_alignment",
    "weighted_reward",
]


def epoch_cost(n_envs, rollouts_per_env, regime="real"):
    return json.loads(_envforge._epoch_cost(n_envs, rollouts_per_env, regime))


def reward_alignment(records):
    """records: iterable of (vlm_label, code_reward) pairs."""
    return json.loads(_envforge._reward_alignment([tuple(r) for r in records]))


def length_distribution(lengths, clip=20):
    return json.loads(_envforge._length_distribution(list(lengths), clip))
