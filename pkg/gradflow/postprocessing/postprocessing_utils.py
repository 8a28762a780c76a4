# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import numpy as np
from gradflow.utils.utilities import ValidationError, save_csv

degenerate_span = 1e-12  # normalizing distances below this are not applicable
settling_bands = (0.10, 0.01)
metric_names = ('overshoot_pct', 'settle10', 'settle1', 'error_pct')
metric_labels = {'overshoot_pct': 'M_p (%)', 'settle10': 't_10', 'settle1': 't_1', 'error_pct': '% error'}


class ScalarMetrics(object):
    """
    Performance metrics of one scalar trajectory x(t) converging to x_f = x(T), measured against the optimum x*.
    """
    def __init__(self, overshoot_pct, settle10, settle1, error_pct, x0, xf, xmax, applicable=True):
        """
        :param overshoot_pct: percent overshoot M_p, relative to |x_f - x_0|
        :param settle10: settling time in the 10% band, inf when the trajectory does not settle before T
        :param settle1: settling time in the 1% band, inf when the trajectory does not settle before T
        :param error_pct: percent error 100 |x* - x_f| / |x* - x_0|, nan when x_0 is already optimal
        :param x0: initial value
        :param xf: final value
        :param xmax: extreme value in the direction of motion
        :param applicable: False when |x_f - x_0| is too small to normalize, the metrics are then nan
        """
        self.overshoot_pct = float(overshoot_pct)
        self.settle10 = float(settle10)
        self.settle1 = float(settle1)
        self.error_pct = float(error_pct)
        self.x0 = float(x0)
        self.xf = float(xf)
        self.xmax = float(xmax)
        self.applicable = bool(applicable)

    @property
    def settled10(self):
        return bool(np.isfinite(self.settle10))

    @property
    def settled1(self):
        return bool(np.isfinite(self.settle1))

    def to_dict(self):
        return {'overshoot_pct': self.overshoot_pct, 'settle10': self.settle10, 'settle1': self.settle1,
                'error_pct': self.error_pct, 'x0': self.x0, 'xf': self.xf, 'xmax': self.xmax,
                'applicable': self.applicable}

    def __repr__(self):
        return ('ScalarMetrics(M_p=%.4g%%, t_10=%.4g, t_1=%.4g, error=%.4g%%)'
                % (self.overshoot_pct, self.settle10, self.settle1, self.error_pct))


class WorstCaseReport(object):
    """
    Metrics of every tracked scalar x_ij of a trajectory and the worst case over them.
    """
    def __init__(self, agents, variables, metrics, horizon):
        """
        :param agents: agent index of every scalar
        :param variables: variable index of every scalar
        :param metrics: list of ScalarMetrics, one per scalar
        :param horizon: final time of the trajectory
        """
        self.agents = np.asarray(agents, dtype=int)
        self.variables = np.asarray(variables, dtype=int)
        self.metrics = list(metrics)
        self.horizon = float(horizon)

    @property
    def worst(self):
        """
        Maximum of every metric over the applicable scalars (nan if none is applicable).
        """
        worst = {}
        for name in metric_names:
            values = [getattr(item, name) for item in self.metrics
                      if item.applicable and not np.isnan(getattr(item, name))]
            worst[name] = float(np.max(values)) if values else float('nan')
        return worst

    def rows(self):
        """
        :return: one row per scalar, then the worst-case row with agent and variable set to -1
        """
        rows = [[agent, variable] + [getattr(item, name) for name in metric_names] +
                [item.x0, item.xf, item.xmax, float(item.applicable)]
                for agent, variable, item in zip(self.agents, self.variables, self.metrics)]
        worst = self.worst
        rows.append([-1, -1] + [worst[name] for name in metric_names] + [np.nan, np.nan, np.nan, np.nan])
        return rows

    def save(self, file_path):
        header = ['agent', 'variable'] + list(metric_names) + ['x0', 'xf', 'xmax', 'applicable']
        save_csv(file_path, header, self.rows())

    def __repr__(self):
        return 'WorstCaseReport(scalars=%d, worst=%s)' % (len(self.metrics), self.worst)


def _settling_times(times, values, xf, span, band):
    outside = np.abs(values - xf) > band * span
    nb_samples = times.size
    any_outside = outside.any(axis=0)
    last_outside = nb_samples - 1 - np.argmax(outside[::-1], axis=0)
    first_inside = np.where(any_outside, last_outside + 1, 0)
    # a band entered only at the final sample is not settled
    settled = first_inside < nb_samples - 1
    return np.where(settled, times[np.minimum(first_inside, nb_samples - 1)], np.inf)


def column_metrics(times, values, x_star):
    """
    Vectorized metrics of several scalar trajectories sampled at the same times.

    :param times: sample times, shape (K,)
    :param values: samples, shape (K, C), one column per scalar
    :param x_star: optimal value of every column, shape (C,) or scalar
    :return: list of C ScalarMetrics
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, np.newaxis]
    if times.ndim != 1 or times.size < 2:
        raise ValueError('at least 2 samples are needed to compute the metrics')
    if values.shape[0] != times.size:
        raise ValueError('values should have one row per sample time')
    x_star = np.broadcast_to(np.asarray(x_star, dtype=float), (values.shape[1],))

    x0, xf = values[0], values[-1]
    span = np.abs(xf - x0)
    applicable = span >= degenerate_span
    safe_span = np.where(applicable, span, 1.0)
    direction = np.where(xf >= x0, 1.0, -1.0)

    deviation = direction * (values - xf)
    peak_index = np.argmax(deviation, axis=0)
    columns = np.arange(values.shape[1])
    xmax = values[peak_index, columns]
    overshoot = 100 * np.maximum(deviation[peak_index, columns], 0) / safe_span
    settle10, settle1 = (_settling_times(times, values, xf, safe_span, band) for band in settling_bands)
    # normalized by the distance to the optimum, not the distance travelled
    error_span = np.abs(x_star - x0)
    error = np.where(error_span >= degenerate_span,
                     100 * np.abs(x_star - xf) / np.where(error_span >= degenerate_span, error_span, 1.0), np.nan)

    metrics = []
    for col in columns:
        if applicable[col]:
            metrics.append(ScalarMetrics(overshoot[col], settle10[col], settle1[col], error[col],
                                         x0[col], xf[col], xmax[col]))
        else:
            metrics.append(ScalarMetrics(np.nan, np.nan, np.nan, np.nan, x0[col], xf[col], xmax[col],
                                         applicable=False))
    return metrics


def scalar_metrics(times, values, x_star):
    """
    Percent overshoot, settling times in the 10% and 1% bands and percent error of one scalar trajectory.

    With x_f the last sample and s = sign(x_f - x_0):
    M_p = 100 max(0, max_t s (x(t) - x_f)) / |x_f - x_0|, t_b is the first sample after which
    |x(t) - x_f| <= b |x_f - x_0| holds until the end and error = 100 |x* - x_f| / |x* - x_0|.

    :param times: sample times
    :param values: samples of x(t)
    :param x_star: the optimal value
    :return: the ScalarMetrics
    """
    return column_metrics(times, np.asarray(values, dtype=float).ravel(), x_star)[0]


def report(trajectory, layout, x_star):
    """
    Metrics of every (agent, variable) scalar tracked in the layout, and their worst case.

    :param trajectory: the Trajectory
    :param layout: the AggregateLayout of the run
    :param x_star: the optimum, vector of length n
    :return: the WorstCaseReport
    """
    x_star = np.asarray(x_star, dtype=float).ravel()
    if x_star.size != layout.variable_count:
        raise ValidationError('x_star should have %d entries, got %d' % (layout.variable_count, x_star.size))
    if trajectory.z_dim != layout.z_dim:
        raise ValidationError('the trajectory has %d columns but the layout expects %d'
                              % (trajectory.z_dim, layout.z_dim))
    metrics = column_metrics(trajectory.times, trajectory.z, x_star[layout.z_variable])
    return WorstCaseReport(layout.z_agent, layout.z_variable, metrics, trajectory.times[-1])


def optimality_gap(z_final, x_star, layout):
    """
    Largest distance max_ij |x_ij - x*_j| between a tracked copy and the optimum.
    """
    z_final = layout.check_z(z_final)
    x_star = np.asarray(x_star, dtype=float).ravel()
    if x_star.size != layout.variable_count:
        raise ValueError('x_star should have %d entries, got %d' % (layout.variable_count, x_star.size))
    return float(np.max(np.abs(z_final - x_star[layout.z_variable])))


def format_value(value, name, horizon=None):
    if np.isnan(value):
        return 'n/a'
    if name in ('settle10', 'settle1'):
        if np.isinf(value):
            return 'not settled (> %g)' % horizon if horizon is not None else 'not settled'
        return '%.2f' % value
    return '%.2f%%' % value


def format_table(columns, published=None):
    """
    Aligned text table with one row per metric and one column per configuration.

    :param columns: ordered dictionary label -> WorstCaseReport
    :param published: optional dictionary label -> {metric name: published value}, printed in brackets
    :return: the table as a string
    """
    labels = list(columns)
    cells = [['metric'] + labels]
    for name in metric_names:
        row = [metric_labels[name]]
        for label in labels:
            text = format_value(columns[label].worst[name], name, columns[label].horizon)
            if published is not None and label in published:
                text += ' [%s]' % format_value(published[label][name], name)
            row.append(text)
        cells.append(row)
    widths = [max(len(row[col]) for row in cells) for col in range(len(cells[0]))]
    lines = ['  '.join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in cells]
    lines.insert(1, '  '.join('-' * width for width in widths))
    if published is not None:
        lines.append('[published values in brackets]')
    return '\n'.join(lines)


def long_format(trajectory, layout, variable=None, agents=None):
    """
    Plot-ready rows (time, series label, value) for the selected tracked scalars.

    :param trajectory: the Trajectory
    :param layout: the AggregateLayout of the run
    :param variable: index of the variable to select, None for all variables
    :param agents: optional list of agents to keep
    :return: list of (time, label, value) tuples, series after series
    """
    if variable is not None and not 0 <= variable < layout.variable_count:
        raise ValidationError('unknown variable %s, the problem has %d variables' % (variable, layout.variable_count))
    if agents is not None:
        unknown = set(agents) - set(range(layout.node_count))
        if unknown:
            raise ValidationError('unknown agents: ' + str(sorted(unknown)))
    positions = [pos for pos, (agent, var) in enumerate(zip(layout.z_agent, layout.z_variable))
                 if (variable is None or var == variable) and (agents is None or agent in agents)]
    if not positions:
        raise ValidationError('the selection does not match any tracked scalar')
    rows = []
    for pos in positions:
        label = 'x[%d][%d]' % (layout.z_agent[pos], layout.z_variable[pos])
        rows.extend((time, label, value) for time, value in zip(trajectory.times, trajectory.z[:, pos]))
    return rows
