"""Implicit Euler refinement by fixed-point iteration."""

import numpy as np


def residual_step(f, y0, h, iterations=20, tol=1e-10):
    """Refine one implicit Euler step y = y0 + h * f(y) to a fixed point."""
    y = np.asarray(y0, dtype=float)
    for _ in range(iterations):
        y_next = y0 + h * f(y)
        if np.max(np.abs(y_next - y)) < tol:
            return y_next
        y = y_next
    return y


def integrate(f, y0, h, steps):
    """Integrate with refined implicit Euler steps."""
    y = np.asarray(y0, dtype=float)
    for _ in range(steps):
        y = residual_step(f, y, h)
    return y
