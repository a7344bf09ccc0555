"""Blend-weight schedules."""

import math


def cosine_ramp(step, total_steps):
    """Half-cosine ramp of the blend weight from zero to one."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    step = min(max(step, 0), total_steps)
    return 0.5 * (1.0 - math.cos(math.pi * step / total_steps))
