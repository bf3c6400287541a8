"""Shared test oracles."""

from tankbench.checks import gradcheck, max_rel_error, numeric_grad  # noqa: F401
