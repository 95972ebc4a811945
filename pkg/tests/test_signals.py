import pytest
from hypothesis import given, strategies as st

from v2isim.errors import ConflictingGreens, IncompleteColorMap, NotInOverride, UnknownApproach
from v2isim.signals import (Color, Phase, SignalProgram, TrafficLightState, conflicting_approaches,
                            preemption_colors)

G, Y, R = Color.GREEN, Color.YELLOW, Color.RED


def six_phase():
    phases = (Phase({"W": G, "N": R}, 40), Phase({"W": Y, "N": R}, 3), Phase({"W": R, "N": R}, 2),
              Phase({"W": R, "N": G}, 40), Phase({"W": R, "N": Y}, 3), Phase({"W": R, "N": R}, 2))
    return SignalProgram(("W", "N"), phases, frozenset({frozenset(("W", "N"))}))


def light(offset=0.0):
    return TrafficLightState("J", six_phase(), {"W": ("w",), "N": ("n",)}, offset)


def test_phase_lookup():
    tl = light()
    assert tl.program.cycle == 90
    assert tl.color_for("W", 0) is G
    assert tl.color_for("W", 39.9) is G
    assert tl.color_for("W", 40) is Y
    assert tl.color_for("W", 44) is R
    assert tl.color_for("N", 45) is G
    assert tl.color_for("N", 90 + 45) is G


def test_offset_shifts_schedule():
    assert light(offset=45).color_for("N", 0) is G


@given(st.integers(0, 40_000), st.integers(1, 20))
def test_static_schedule_is_periodic(tick, k):
    # simulation times are whole multiples of dt
    tl = light(offset=17.0)
    t = tick * 0.25
    assert tl.colors(t) == tl.colors(t + k * tl.program.cycle)


def test_conflicting_greens_rejected():
    with pytest.raises(ConflictingGreens):
        SignalProgram(("W", "N"), (Phase({"W": G, "N": G}, 10),), frozenset({frozenset(("W", "N"))}))


def test_phase_must_color_every_approach():
    with pytest.raises(IncompleteColorMap):
        SignalProgram(("W", "N"), (Phase({"W": G}, 10),))


def test_conflict_relation_is_symmetric():
    p = six_phase()
    for a in p.approaches:
        for b in conflicting_approaches(p, a):
            assert a in conflicting_approaches(p, b)
    with pytest.raises(UnknownApproach):
        conflicting_approaches(p, "S")


def test_override_and_resume():
    tl = light()
    assert tl.mode == "static"
    tl.set_override(preemption_colors(tl, "N"))
    assert tl.mode == "override"
    assert tl.colors(0) == {"W": R, "N": G}
    tl.set_override(preemption_colors(tl, "N"))     # idempotent
    assert tl.colors(3) == {"W": R, "N": G}
    tl.clear_override(60.0)
    assert tl.colors(60.0) == light().colors(60.0)  # time-synced resume
    with pytest.raises(NotInOverride):
        tl.clear_override(61.0)


def test_override_validation():
    tl = light()
    with pytest.raises(IncompleteColorMap):
        tl.set_override({"W": G})
    with pytest.raises(ConflictingGreens):
        tl.set_override({"W": G, "N": G})
    with pytest.raises(UnknownApproach):
        preemption_colors(tl, "S")


@given(st.sampled_from(["W", "N"]), st.integers(1, 5))
def test_override_idempotent(approach, times):
    tl = light()
    for _ in range(times):
        tl.set_override(preemption_colors(tl, approach))
    assert tl.colors(0)[approach] is G
    assert sum(c is G for c in tl.colors(0).values()) == 1
