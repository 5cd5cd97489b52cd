"""Adaptive traffic-signal control with asynchronous advantage actor-critic."""

__version__ = "0.1.0"
