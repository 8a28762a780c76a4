# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import numpy as np
import pytest
import gradflow.postprocessing.postprocessing_utils as pu
import gradflow.simulation.simulation_utils as simu
from gradflow.utils.utilities import ValidationError

times = np.round(np.arange(0, 20.0 + 1e-9, 0.01), 10)


def brute_force_settling(times, values, band):
    xf, span = values[-1], abs(values[-1] - values[0])
    for idx in range(times.size - 1):
        if all(abs(value - xf) <= band * span for value in values[idx:]):
            return times[idx]
    return np.inf


def test_monotone_approach():
    metrics = pu.scalar_metrics(times, 3.0 * (1 - np.exp(-times)), 3.0)
    assert metrics.overshoot_pct == 0
    assert metrics.settle10 == pytest.approx(np.log(10), abs=0.01)
    assert metrics.settle1 == pytest.approx(np.log(100), abs=0.01)
    assert metrics.error_pct == pytest.approx(0, abs=1e-4)
    assert metrics.applicable and metrics.settled10 and metrics.settled1


def test_overshoot_and_error():
    values = 2.0 * (1 - np.exp(-times) * np.cos(2 * times))
    metrics = pu.scalar_metrics(times, values, 2.5)
    peak = values.max()
    assert metrics.xmax == peak
    assert metrics.overshoot_pct == pytest.approx(100 * (peak - values[-1]) / abs(values[-1]))
    assert metrics.error_pct == pytest.approx(100 * abs(2.5 - values[-1]) / 2.5, rel=1e-6)
    assert metrics.settle10 <= metrics.settle1


def test_decreasing_trajectory_uses_signed_direction():
    values = -2.0 * (1 - np.exp(-times) * np.cos(2 * times))
    mirrored = pu.scalar_metrics(times, -values, 2.0)
    metrics = pu.scalar_metrics(times, values, -2.0)
    assert metrics.overshoot_pct == pytest.approx(mirrored.overshoot_pct)
    assert metrics.settle1 == mirrored.settle1


def test_settling_matches_brute_force_scan():
    rng = np.random.default_rng(0)
    short = times[:300]
    values = 1 - np.exp(-short / 0.5) * np.cos(3 * short) + 0.002 * rng.standard_normal(short.size)
    metrics = pu.scalar_metrics(short, values, 1.0)
    assert metrics.settle10 == brute_force_settling(short, values, 0.10)
    assert metrics.settle1 == brute_force_settling(short, values, 0.01)


def test_not_settled_when_band_reached_at_the_end():
    values = np.array([0.0, 0.2, 0.4, 0.6, 1.0])
    metrics = pu.scalar_metrics(np.arange(5.0), values, 1.0)
    assert metrics.settle10 == np.inf and not metrics.settled10
    assert 'not settled (> 4)' in pu.format_value(metrics.settle10, 'settle10', 4.0)


def test_degenerate_normalization():
    metrics = pu.scalar_metrics(times, np.full(times.size, 3.4), 3.4)
    assert not metrics.applicable
    assert np.isnan(metrics.overshoot_pct)


def test_error_undefined_when_starting_at_optimum():
    values = 2.0 - np.exp(-times)
    metrics = pu.scalar_metrics(times, values, 1.0)
    assert metrics.applicable and np.isnan(metrics.error_pct)
    assert metrics.settle1 == pytest.approx(np.log(100), abs=0.01)


def test_report_worst_case(line3):
    _, _, layout = line3
    curve = 1 - np.exp(-times)
    z = np.column_stack([curve * x for x in (3.4, 3.4, 3.4, 3.2, 3.2, 3.2)])
    z[:, 4] = 3.2 * (1 - np.exp(-times) * np.cos(2 * times))
    report = pu.report(simu.Trajectory(times, z), layout, [3.4, 3.2])
    worst = report.worst
    single = pu.scalar_metrics(times, z[:, 4], 3.2)
    assert worst['overshoot_pct'] == single.overshoot_pct
    assert worst['settle1'] == max(item.settle1 for item in report.metrics)
    assert len(report.rows()) == 7
    with pytest.raises(ValidationError):
        pu.report(simu.Trajectory(times, z), layout, [3.4])


def test_identical_agents_give_single_worst_case(line3):
    _, _, layout = line3
    curve = 1 - np.exp(-times)
    report = pu.report(simu.Trajectory(times, np.column_stack([curve] * 6)), layout, [1.0, 1.0])
    single = pu.scalar_metrics(times, curve, 1.0)
    for name in pu.metric_names:
        assert report.worst[name] == getattr(single, name)


def test_optimality_gap(line3):
    _, _, layout = line3
    assert pu.optimality_gap(np.array([3.4] * 3 + [3.2] * 3), [3.4, 3.2], layout) == 0
    assert pu.optimality_gap(np.array([3.4, 3.5, 3.4, 3.2, 3.2, 3.0]), [3.4, 3.2], layout) == pytest.approx(0.2)


def test_metrics_csv_and_table(tmp_path, line3):
    _, _, layout = line3
    curve = 1 - np.exp(-times)
    report = pu.report(simu.Trajectory(times, np.column_stack([curve] * 6)), layout, [1.0, 1.0])
    path = tmp_path / 'metrics.csv'
    report.save(str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith('agent,variable,overshoot_pct,settle10,settle1,error_pct')
    assert lines[-1].startswith('-1,-1,')
    text = pu.format_table({'PI': report}, {'PI': {'overshoot_pct': 14.95, 'settle10': 5.14, 'settle1': 13.19,
                                                   'error_pct': 0.0}})
    assert '[14.95%]' in text and 't_10' in text


def test_long_format_selection(ring20_reduced):
    _, _, layout = ring20_reduced
    trajectory = simu.Trajectory([0.0, 1.0], np.zeros((2, layout.z_dim)))
    rows = pu.long_format(trajectory, layout, variable=10)
    assert sorted(set(label for _, label, _ in rows)) == ['x[10][10]', 'x[11][10]', 'x[9][10]']
    assert len(pu.long_format(trajectory, layout, variable=10, agents=[9])) == 2
    with pytest.raises(ValidationError):
        pu.long_format(trajectory, layout, variable=25)
    with pytest.raises(ValidationError):
        pu.long_format(trajectory, layout, variable=10, agents=[0])
