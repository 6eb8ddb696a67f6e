#!/usr/bin/env python3
"""
Tests for the verification suites on small instance counts
"""

import sys

import numpy as np

from stochastic_channel import TaylorConfig
from verification_suites import COLUMNS, SUITES, fit_loglog_slope, run_suite, suite_passed

SMALL_RUNS = [
    ('paulinorm', None),
    ('taylor', None),
    ('dilation', 1),
    ('closedform', None),
    ('thm3', 8),
    ('bounds', 2),
    ('modes', 2000),
    ('correlated', 2000),
    ('converge', None),
]


def test_registry():
    print("\n" + "=" * 70)
    print("TEST: Suite registry")
    print("=" * 70)

    assert set(SUITES) == {name for name, _ in SMALL_RUNS}
    try:
        run_suite('nonsense')
        raise AssertionError("expected ValueError for an unknown suite")
    except ValueError:
        pass
    print("✓ Every suite is registered and unknown names are rejected")

    x = np.array([0.1, 0.2, 0.4, 0.8])
    assert np.isclose(fit_loglog_slope(x, 3 * x ** 2), 2.0)
    print("✓ Log-log slope fit")


def test_suites_pass():
    print("\n" + "=" * 70)
    print("TEST: Small suite runs")
    print("=" * 70)

    for name, instances in SMALL_RUNS:
        table = run_suite(name, seed=1, instances=instances)
        assert list(table.columns) == COLUMNS, f"{name}: columns {list(table.columns)}"
        assert len(table) > 0
        failed = table.loc[~table['pass'], 'instance'].tolist()
        assert suite_passed(table), f"{name} failed rows: {failed}"
        print(f"✓ {name}: {len(table)} rows passed")


def test_taylor_cells():
    print("\n" + "=" * 70)
    print("TEST: Truncated Poisson grid")
    print("=" * 70)

    table = run_suite('taylor')
    assert len(table) == 9
    failed = table.loc[~table['pass'], 'instance'].tolist()
    assert table['pass'].all(), f"failed cells: {failed}"
    assert (table['measured'] <= table['reference']).all()
    print("✓ All 9 (a dt, K) cells within 2 (a dt)^(K+1) / (K+1)!")

    for label, measured in zip(table['instance'], table['measured']):
        x, K = (part.split('=')[1] for part in label.split(','))
        tight = TaylorConfig(int(K), float(x) / 0.1, 0.1).error_bound()
        assert measured <= tight + 1e-12, f"{label}: {measured:.3e} above 2 * tail {tight:.3e}"
    print("✓ Each cell also within twice the Poisson tail")


def test_commuting_single_step():
    print("\n" + "=" * 70)
    print("TEST: Commuting single-step instance")
    print("=" * 70)

    table = run_suite('thm3', instances=5, commuting=True)
    assert suite_passed(table)
    assert (table['measured'] < 1e-9).all(), "commuting splitting should be exact"
    print("✓ Commuting H and D give no splitting error")


if __name__ == '__main__':
    print("=" * 70)
    print("VERIFICATION SUITE TESTS")
    print("=" * 70)

    try:
        test_registry()
        test_suites_pass()
        test_taylor_cells()
        test_commuting_single_step()

        print()
        print("=" * 70)
        print("ALL TESTS PASSED ✓")
        print("=" * 70)
        sys.exit(0)
    except Exception as e:
        print()
        print("=" * 70)
        print(f"TESTS FAILED ✗: {e}")
        print("=" * 70)
        import traceback
        traceback.print_exc()
        sys.exit(1)
