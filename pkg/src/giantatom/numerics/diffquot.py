"""Cancellation-safe difference quotients of analytic functions."""

from __future__ import annotations


def safe_difference_quotient(f, fprime, a, b, threshold=None, scale=1.0):
    """Evaluate ``(f(a) - f(b)) / (a - b)`` without catastrophic cancellation.

    For ``|a - b|`` above ``threshold`` the quotient is formed directly.
    Below it, the midpoint expansion

        f'(m) + (a - b)^2 / 24 * f'''(m),   m = (a + b)/2

    is used, with ``f'''`` estimated from a symmetric second difference of
    the supplied analytic derivative ``fprime``.  The two regimes agree to
    third order at the switch, keeping the result continuous well below any
    tolerance of interest.

    Parameters
    ----------
    f, fprime : callables
        The analytic function and its analytic first derivative.
    threshold : float, optional
        Switch point; defaults to ``1e-6 * max(|a|, |b|, scale)``.
    scale : float
        Characteristic argument scale used in the default threshold.
    """
    if threshold is None:
        threshold = 1e-6 * max(abs(a), abs(b), scale)
    h = a - b
    if abs(h) > threshold:
        return (f(a) - f(b)) / h
    m = 0.5 * (a + b)
    step = 1e-4 * max(abs(m), scale)
    f3 = (fprime(m + step) - 2.0 * fprime(m) + fprime(m - step)) / step ** 2
    return fprime(m) + h * h / 24.0 * f3
