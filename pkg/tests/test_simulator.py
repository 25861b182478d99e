"""Scenario simulator: script validation, frame generation, ground truth."""

from __future__ import annotations

import pytest

from traytrack.errors import ScenarioError
from traytrack.simulator import (
    SIM_EPOCH_MS,
    NoiseModel,
    ScenarioScript,
    ScriptAction,
    TraySimulator,
    ground_truth,
    is_ghost_tag,
    load_scenario,
    run,
    scenario_from_dict,
)

QUIET = NoiseModel(weight_sigma_g=0.0, tag_read_prob=1.0, spurious_tag_prob=0.0)


def make_script(**overrides) -> ScenarioScript:
    base = dict(
        tray_id="T1",
        base_weight_g=500.0,
        sample_rate_hz=10.0,
        duration_s=10.0,
        actions=(),
        noise=QUIET,
        seed=42,
    )
    base.update(overrides)
    return ScenarioScript(**base)


# --- script loading and validation ---


def test_load_empty_scenario(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text(
        "schema: 1\ntray_id: T1\nbase_weight_g: 500.0\nsample_rate_hz: 10\nduration_s: 10\n"
    )
    script = load_scenario(path)
    assert script.actions == ()
    assert script.base_weight_g == 500.0


def test_remove_of_absent_tag_rejected():
    with pytest.raises(ScenarioError, match="remove of absent tag"):
        make_script(actions=(ScriptAction(time_s=5.0, kind="remove", tag_id="C:A"),))


def test_unsorted_actions_rejected():
    acts = (
        ScriptAction(time_s=5.0, kind="place", tag_id="C:A", gross_g=150.0),
        ScriptAction(time_s=2.0, kind="place", tag_id="C:B", gross_g=100.0),
    )
    with pytest.raises(ScenarioError, match="sorted"):
        make_script(actions=acts)


def test_action_time_must_fit_duration():
    acts = (ScriptAction(time_s=99.0, kind="place", tag_id="C:A", gross_g=1.0),)
    with pytest.raises(ScenarioError, match="outside"):
        make_script(actions=acts, duration_s=10.0)


def test_place_needs_positive_gross():
    with pytest.raises(ScenarioError, match="gross_g"):
        ScriptAction(time_s=1.0, kind="place", tag_id="C:A", gross_g=0.0)


def test_tag_must_be_container_prefixed():
    with pytest.raises(ScenarioError, match="C:"):
        ScriptAction(time_s=1.0, kind="place", tag_id="A", gross_g=1.0)


def test_noise_probabilities_bounded():
    with pytest.raises(ScenarioError):
        NoiseModel(tag_read_prob=1.5)
    with pytest.raises(ScenarioError):
        NoiseModel(weight_sigma_g=-0.1)


def test_unknown_scenario_field_rejected():
    with pytest.raises(ScenarioError, match="unknown"):
        scenario_from_dict(
            {
                "schema": 1,
                "tray_id": "T1",
                "base_weight_g": 1.0,
                "sample_rate_hz": 10,
                "duration_s": 1.0,
                "bogus": 3,
            }
        )


def test_schema_version_checked():
    with pytest.raises(ScenarioError, match="schema"):
        scenario_from_dict({"schema": 2, "tray_id": "T1"})


def test_parse_error_carries_line(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("schema: 1\ntray_id: [unclosed\n")
    with pytest.raises(ScenarioError, match="line"):
        load_scenario(path)


def test_three_action_script_has_three_truth_entries():
    acts = (
        ScriptAction(time_s=1.0, kind="place", tag_id="C:A", gross_g=150.0),
        ScriptAction(time_s=4.0, kind="dispense_in_place", tag_id="C:A", delta_g=-10.0),
        ScriptAction(time_s=8.0, kind="remove", tag_id="C:A"),
    )
    assert len(ground_truth(make_script(actions=acts))) == 3


# --- frame generation ---


def frame_at(sim: TraySimulator, t_s: float, rate: float = 10.0):
    frame = None
    for _ in range(round(t_s * rate) + 1):
        frame = sim.step()
    return frame


def test_noiseless_empty_tray_frame():
    sim = TraySimulator(make_script())
    frame = frame_at(sim, 1.0)
    assert frame.weight_g == 500.0
    assert frame.tags == ()
    assert frame.timestamp_ms == SIM_EPOCH_MS + 1000


def test_weight_after_place_settles_to_sum():
    acts = (ScriptAction(time_s=2.0, kind="place", tag_id="C:A", gross_g=150.0, settle_s=0.5),)
    sim = TraySimulator(make_script(actions=acts))
    frame = frame_at(sim, 8.0)
    assert frame.weight_g == 650.0
    assert frame.tags == ("C:A",)


def test_transient_decays_toward_target():
    acts = (ScriptAction(time_s=2.0, kind="place", tag_id="C:A", gross_g=150.0, settle_s=1.0),)
    sim = TraySimulator(make_script(actions=acts))
    frames = []
    while (f := sim.step()) is not None:
        frames.append(f)
    at_step = frames[20]  # t = 2.0 s, continuous with the pre-step weight
    assert at_step.weight_g == pytest.approx(500.0, abs=0.001)
    later = frames[25]  # t = 2.5 s, mid-transient
    assert 500.0 < later.weight_g < 650.0
    # Post-settle weight is exact: transients must not leave residue.
    assert frames[99].weight_g == 650.0


def test_stream_is_deterministic_by_seed():
    noisy = NoiseModel(weight_sigma_g=0.2, tag_read_prob=0.9, spurious_tag_prob=0.01)
    acts = (ScriptAction(time_s=2.0, kind="place", tag_id="C:A", gross_g=150.0),)
    frames_a, _ = run(make_script(actions=acts, noise=noisy, seed=7))
    frames_b, _ = run(make_script(actions=acts, noise=noisy, seed=7))
    frames_c, _ = run(make_script(actions=acts, noise=noisy, seed=8))
    assert frames_a == frames_b
    assert frames_a != frames_c


def test_run_covers_full_duration():
    frames, _ = run(make_script(duration_s=10.0, sample_rate_hz=10.0))
    assert len(frames) == 100
    assert frames[0].seq == 1
    assert frames[-1].seq == 100


def test_noiseless_frames_exact_with_full_reads():
    acts = (
        ScriptAction(time_s=2.0, kind="place", tag_id="C:A", gross_g=150.0),
        ScriptAction(time_s=5.0, kind="place", tag_id="C:B", gross_g=37.5),
    )
    frames, _ = run(make_script(actions=acts))
    for frame in frames:
        t = (frame.seq - 1) / 10.0
        expected = 500.0 + (150.0 if t >= 2.0 else 0.0) + (37.5 if t >= 5.0 else 0.0)
        assert frame.weight_g == expected
        expected_tags = tuple(
            tag for tag, at in (("C:A", 2.0), ("C:B", 5.0)) if t >= at
        )
        assert frame.tags == expected_tags


def test_dropouts_and_ghost_reads_occur_at_configured_rates():
    noisy = NoiseModel(weight_sigma_g=0.0, tag_read_prob=0.5, spurious_tag_prob=0.2)
    acts = (ScriptAction(time_s=0.0, kind="place", tag_id="C:A", gross_g=10.0),)
    frames, _ = run(make_script(actions=acts, noise=noisy, duration_s=200.0, seed=3))
    reads = sum("C:A" in f.tags for f in frames)
    ghosts = sum(any(is_ghost_tag(t) for t in f.tags) for f in frames)
    assert 0.4 < reads / len(frames) < 0.6
    assert 0.1 < ghosts / len(frames) < 0.3


# --- ground truth ---


def test_place_then_remove_truth_deltas():
    acts = (
        ScriptAction(time_s=2.0, kind="place", tag_id="C:A", gross_g=150.0),
        ScriptAction(time_s=6.0, kind="remove", tag_id="C:A"),
    )
    truth = ground_truth(make_script(actions=acts))
    assert [(e.kind, e.delta_g) for e in truth] == [("Return", 150.0), ("Remove", -150.0)]


def test_dispense_truth_is_adjust_on_that_tag():
    acts = (
        ScriptAction(time_s=1.0, kind="place", tag_id="C:A", gross_g=150.0),
        ScriptAction(time_s=5.0, kind="dispense_in_place", tag_id="C:A", delta_g=-10.0),
    )
    truth = ground_truth(make_script(actions=acts))
    assert truth[1].kind == "Adjust"
    assert truth[1].tag_id == "C:A"
    assert truth[1].delta_g == -10.0


def test_remove_after_dispense_uses_current_gross():
    acts = (
        ScriptAction(time_s=1.0, kind="place", tag_id="C:A", gross_g=150.0),
        ScriptAction(time_s=4.0, kind="dispense_in_place", tag_id="C:A", delta_g=-10.0),
        ScriptAction(time_s=8.0, kind="remove", tag_id="C:A"),
    )
    truth = ground_truth(make_script(actions=acts))
    assert truth[2].delta_g == -140.0
