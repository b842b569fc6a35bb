import json
import math

import numpy as np
import pytest

from hdrot.config import SimulationConfig
from hdrot.kinetics import Radiation, RateModel, Trajectory, integrate, prepare_cooled_state
from hdrot.pipeline import build_model, run_trajectory, simulate
from hdrot.protocol import (
    DecayTrace,
    FluorescenceModel,
    SignalFloorError,
    TimelineConfig,
    build_timeline,
    method2_levels,
    method2_signal,
    synthesize_trace,
    write_traces_csv,
)

N_MAX = 8


# --- timelines ------------------------------------------------------------------------

def test_method1_timeline(catalog):
    tl = build_timeline("I", catalog.frequency_list("A"))
    names = [p.name for p in tl.phases]
    assert names == ["prep", "cooling", "spectroscopy"]
    cool, obs = tl.phases[1], tl.phases[2]
    assert cool.duration == 35.0 and obs.duration >= 60.0
    assert cool.radiation.cooling_2p7 and not obs.radiation.cooling_2p7
    assert cool.radiation.secular_scan and obs.radiation.secular_scan
    assert obs.radiation.thz and obs.radiation.rempd and obs.start == cool.stop
    assert not cool.radiation.thz and not cool.radiation.rempd
    assert tl.rempd_start == obs.start and tl.metadata["cooling_duration_s"] == 35.0


def test_method2_timeline(catalog):
    tl = build_timeline("II", catalog.frequency_list("A"))
    exc = next(p for p in tl.phases if p.name == "excitation")
    assert exc.duration == 3.0 and exc.radiation.thz and exc.radiation.rempd
    assert tl.rempd_stop - tl.rempd_start == 3.0
    cool = next(p for p in tl.phases if p.name == "cooling")
    assert not cool.radiation.secular_scan
    read = next(p for p in tl.phases if p.name == "readout")
    assert read.radiation.secular_scan and read.start == exc.stop
    assert not exc.radiation.cooling_5p5 and not exc.radiation.cooling_2p7
    # cooling (including its normalization window) lasts T_c
    norm = next(p for p in tl.phases if p.name == "normalization")
    assert cool.stop - norm.start == 35.0


def test_timing_independent_of_list(catalog):
    a = build_timeline("I", catalog.frequency_list("A"))
    d = build_timeline("I", catalog.frequency_list("detuned500"))
    assert [(p.start, p.duration, p.radiation) for p in a.phases] == \
        [(p.start, p.duration, p.radiation) for p in d.phases]
    assert d.phases[-1].frequency_list.entries == (500e6,)


def test_invalid_method(catalog):
    with pytest.raises(ValueError):
        build_timeline("III", catalog.frequency_list("A"))


@pytest.mark.parametrize("kw", [dict(cooling=0.0), dict(excitation=-1.0), dict(observation=0.0)])
def test_non_positive_durations(kw):
    with pytest.raises(ValueError):
        TimelineConfig(**kw)


def test_timeline_text(catalog):
    doc = json.loads(build_timeline("II", catalog.frequency_list("B")).to_text())
    assert doc["method"] == "II" and doc["metadata"]["list"] == "B"
    assert doc["metadata"]["trap_drive_MHz"] == 14.2
    assert doc["metadata"]["secular_scan_kHz"] == [740.0, 900.0]
    assert [p["name"] for p in doc["phases"]][-1] == "readout"


@pytest.mark.parametrize("method", ["I", "II"])
def test_schedule_audit(method, catalog):
    tl = build_timeline(method, catalog.frequency_list("A"))
    t = np.arange(0.0, tl.duration, 0.01)
    for flag in ("thz", "rempd", "cooling_5p5", "cooling_2p7", "secular_scan"):
        on = np.array([getattr(tl.radiation_at(x), flag) for x in t])
        allowed = np.zeros_like(on)
        for p in tl.phases:
            if getattr(p.radiation, flag):
                allowed |= (t >= p.start) & (t < p.stop)
        assert np.array_equal(on, allowed)
        if flag == "secular_scan":
            assert np.array_equal(tl.secular_mask(t), allowed)


def test_integration_follows_schedule(catalog):
    cfg = SimulationConfig()
    tl = build_timeline("II", catalog.frequency_list("A"))
    model = build_model(cfg, "II", catalog)
    tr = integrate(prepare_cooled_state(300.0, 0.7), model, tl, tl.duration, t_start=0.0)
    before = tr.times < tl.rempd_start - 1e-9
    after = tr.times > tl.rempd_stop + 1e-9
    assert not tr.dissociated[before].any()
    assert np.ptp(tr.dissociated[after]) == 0.0
    assert tr.dissociated[after][0] > 0.0


# --- fluorescence ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def method1_run(catalog):
    cfg = SimulationConfig()
    return run_trajectory(cfg, "I", catalog.frequency_list("A"), catalog)


def test_identity_mapping(method1_run):
    tl, traj = method1_run
    fm = FluorescenceModel(background_level=0.0, gain=1.0, noise_sigma=0.0)
    tr = synthesize_trace(traj, fm, tl)
    t_abs = tr.times + tl.rempd_start
    on = tl.secular_mask(t_abs)
    assert tr.fluorescence[on] == pytest.approx(traj.molecules_at(t_abs[on]), rel=1e-14)
    assert not tr.fluorescence[~on].any()


def test_half_saturation():
    fm = FluorescenceModel(gain=2.0, saturation_number=300.0)
    assert fm.signal(300.0) == pytest.approx(2.0 * 150.0)


def test_seeded_trace_bit_identical(method1_run):
    tl, traj = method1_run
    fm = FluorescenceModel(noise_sigma=25.0, rng_seed=1234)
    a = synthesize_trace(traj, fm, tl)
    b = synthesize_trace(traj, fm, tl)
    assert a.fluorescence.tobytes() == b.fluorescence.tobytes()
    c = synthesize_trace(traj, FluorescenceModel(noise_sigma=25.0, rng_seed=1235), tl)
    assert not np.array_equal(a.fluorescence, c.fluorescence)


def test_poisson_mode(method1_run):
    tl, traj = method1_run
    fm = FluorescenceModel(poisson=True, rng_seed=5)
    a = synthesize_trace(traj, fm, tl)
    assert np.array_equal(a.fluorescence, synthesize_trace(traj, fm, tl).fluorescence)
    counts = a.fluorescence * fm.sample_interval
    assert np.allclose(counts, np.round(counts))


def test_noise_free_trace_monotone(method1_run):
    tl, traj = method1_run
    tr = synthesize_trace(traj, FluorescenceModel(noise_sigma=0.0), tl)
    y = tr.fluorescence[tr.times >= 0]
    assert np.all(np.diff(y) <= 1e-12)


def test_repetition_average_converges(method1_run):
    tl, traj = method1_run
    sigma, n = 20.0, 100
    clean = synthesize_trace(traj, FluorescenceModel(noise_sigma=0.0), tl).fluorescence
    mean = np.mean([synthesize_trace(traj, FluorescenceModel(noise_sigma=sigma, rng_seed=s), tl).fluorescence
                    for s in range(n)], axis=0)
    err = mean - clean
    se = sigma / math.sqrt(n)
    assert np.std(err) == pytest.approx(se, rel=0.1)
    assert abs(np.mean(err)) < 5 * se / math.sqrt(err.size)


def test_fluorescence_model_validation():
    with pytest.raises(ValueError):
        FluorescenceModel(gain=0.0)
    with pytest.raises(ValueError):
        FluorescenceModel(noise_sigma=-1.0)


def test_trajectory_must_cover_timeline(catalog):
    tl = build_timeline("I", catalog.frequency_list("A"))
    m = RateModel(radiation=Radiation())
    s = prepare_cooled_state(10.0, 0.7)
    s.time = tl.rempd_start
    traj = integrate(s, m, None, tl.rempd_start + 5.0)
    with pytest.raises(ValueError):
        synthesize_trace(traj, FluorescenceModel(), tl)


def test_trace_times_increasing():
    with pytest.raises(ValueError):
        DecayTrace(np.array([0.0, 1.0, 1.0]), np.zeros(3))


def test_trace_csv(tmp_path):
    tr = DecayTrace(np.array([0.0, 0.5]), np.array([10.0, 9.5]), "I", "A", 2, 77)
    p = tmp_path / "t.csv"
    write_traces_csv([tr, tr.replace(rep=3)], p)
    lines = p.read_text().splitlines()
    assert lines[0] == "time_s,fluorescence,method,list,rep,seed"
    assert lines[1] == "0,10,I,A,2,77" and lines[-1] == "0.5,9.5,I,A,3,77"


# --- Method II ------------------------------------------------------------------------

def test_method2_signal_arithmetic():
    assert method2_signal(250.0, 250.0) == 1.0
    assert method2_signal(100.0, 70.0) == pytest.approx(0.7)
    with pytest.raises(SignalFloorError):
        method2_signal(5.0, 4.0, noise_floor=10.0)
    with pytest.raises(SignalFloorError):
        method2_signal(0.0, 1.0)


def test_method2_levels_noise_free(catalog):
    cfg = SimulationConfig()
    tl, traj = run_trajectory(cfg, "II", catalog.frequency_list("detuned500"), catalog)
    tr = synthesize_trace(traj, FluorescenceModel(background_level=200.0, gain=2.0, noise_sigma=0.0), tl)
    before, after = method2_levels(tr, tl, background=200.0)
    assert before == pytest.approx(600.0)
    survive = traj.molecules_at(tl.rempd_stop) / 300.0
    assert after / before == pytest.approx(survive, rel=1e-9)


def test_method2_pipeline_separation(cfg):
    a = simulate(cfg, "II", "A", reps=9)
    bg = simulate(cfg, "II", "detuned500", reps=9)
    ra, rb = 1 - np.array(a.values), 1 - np.array(bg.values)
    combined = math.hypot(ra.std(ddof=1), rb.std(ddof=1))
    assert rb.mean() - ra.mean() >= 3 * combined
