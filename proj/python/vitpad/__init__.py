# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the vitpad core."""

from ._core import (
    ConfigError,
    ShapeError,
    compute_metrics,
    conv2d,
    count_cost,
    default_config,
    forward_init,
    matmul,
    msmhsa_forward,
    param_count,
    run_cli,
    select_threshold,
    selftest,
    softmax,
    token_count,
)

__all__ = [
    "ConfigError",
    "ShapeError",
    "compute_metrics",
    "conv2d",
    "count_cost",
    "default_config",
    "forward_init",
    "matmul",
    "msmhsa_forward",
    "param_count",
    "run_cli",
    "select_threshold",
    "selftest",
    "softmax",
    "token_count",
]
