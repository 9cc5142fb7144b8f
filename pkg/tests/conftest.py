"""Shared fixtures: the two canonical instances exercised across the suite.

``product_instance`` is the hand-enumerable Product run whose greedy trace is
{Rejected, worker 3, worker 1, worker 2}; ``tabulated_instance`` is the
non-order-preserving table on which greedy (reward 2) is beaten by the
offline optimum (reward 3).
"""

from __future__ import annotations

import pytest

from sstap import Instance, Interval, ThresholdFunction, Worker

PRODUCT_RATES = (0.4, 0.5, 0.6, 0.7)
PRODUCT_JOBS = (0.0975, 0.275, 0.9575, 0.4854)
PRODUCT_ALPHA = 0.15

TABULATED_JOBS = (1.0, 2.0, 3.0)
TABULATED_RATES = (0.25, 0.5, 0.75)
TABULATED_ALPHA = 0.1
NON_ORDER_PRESERVING_TABLE = {
    (1.0, 0.25): 0.5,
    (2.0, 0.25): 0.08,
    (3.0, 0.25): 0.5,
    (1.0, 0.5): 0.4,
    (2.0, 0.5): 0.1,
    (3.0, 0.5): 0.4,
    (1.0, 0.75): 0.7,
    (2.0, 0.75): 0.03,
    (3.0, 0.75): 0.1,
}


def make_workers(rates, cycle_rate=float("inf")):
    return tuple(
        Worker(id=i, rate=rate, cycle_rate=cycle_rate)
        for i, rate in enumerate(rates, start=1)
    )


@pytest.fixture
def product_f() -> ThresholdFunction:
    return ThresholdFunction.product(Interval(0.0, 1.0))


@pytest.fixture
def product_instance(product_f) -> Instance:
    return Instance(
        alpha=PRODUCT_ALPHA, f=product_f, workers=make_workers(PRODUCT_RATES)
    )


@pytest.fixture
def tabulated_f() -> ThresholdFunction:
    return ThresholdFunction.tabulated(NON_ORDER_PRESERVING_TABLE)


@pytest.fixture
def tabulated_instance(tabulated_f) -> Instance:
    return Instance(
        alpha=TABULATED_ALPHA, f=tabulated_f, workers=make_workers(TABULATED_RATES)
    )
