from v2isim.regression import (OVERALL_TIME_LOSS, all_checks, emergency_checks, format_table, gridlock_checks,
                               occupancy_checks, overall_check)


def test_occupancy_rows_pass():
    assert all(c.ok for c in occupancy_checks())
    assert len(occupancy_checks()) == 4


def test_longer_slot_breaks_the_occupancy_rows():
    assert not all(c.ok for c in occupancy_checks(5.1))


def test_gridlock_and_overall_rows_pass():
    assert all(c.ok for c in gridlock_checks())
    assert overall_check().ok and overall_check().expected == OVERALL_TIME_LOSS


def test_route_two_travel_time_is_the_only_failure():
    failing = [c.name for c in emergency_checks() if not c.ok]
    assert len(emergency_checks()) == 8
    assert len(failing) == 1 and "route/2" in failing[0] and "travel" in failing[0]


def test_table_format():
    checks = all_checks()
    text = format_table(checks)
    assert len(checks) == 15
    results = [line.split()[-1] for line in text.splitlines()[1:-1]]
    assert results.count("pass") == 14 and results.count("FAIL") == 1
    assert text.endswith("14/15 checks pass\n")
