# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import csv
import os
import shutil
import tempfile
from concurrent.futures import ProcessPoolExecutor
from copy import deepcopy
import numpy as np
import gradflow
import gradflow.algorithms.algorithms_utils as algo
import gradflow.costs.costs_utils as cu
import gradflow.graph.graph_utils as gr
import gradflow.postprocessing.postprocessing_utils as pu
import gradflow.simulation.simulation_utils as simu
from gradflow.dynamics.dynamics_utils import GainSchedule, GradientFlow, MethodSpec, method_labels, validate_method
from gradflow.utils.utilities import ValidationError, canonical_hash, load_file, output_root, save_json

builtin_problems = ('line3', 'ring20', 'ring20-reduced', 'pair2')
default_horizons = {'line3': 2000.0, 'ring20': 10000.0, 'ring20-reduced': 2000.0, 'pair2': 50.0}
scenario_keys = ('name', 'problem', 'topology', 'method', 'gains', 'layout', 'integrator', 'initial', 'output')

fading_gains = {'kG': {'fading': {'a': 1.0, 'b': 0.1}}, 'kP': 1.0, 'kIp': 1.0}
unit_gains = {'kG': 1.0, 'kP': 1.0, 'kIp': 1.0}
# the four configurations of a comparison table: label, method, gains
table_columns = (('P(gamma=1)', 'p', unit_gains),
                 ('P(fading)', 'p', fading_gains),
                 ('I', 'i', unit_gains),
                 ('PI', 'pi', unit_gains))
# problem, layout and integration settings of each table. The sampling interval of table2 is 0.5 to keep
# the 400-dimensional trajectory in memory, its settling times are in the hundreds.
table_settings = {'table1': {'problem': 'line3', 'layout': 'full', 'dt': 0.01, 'horizon': 2000.0,
                             'record_stride': 1, 'record_multipliers': True},
                  'table2': {'problem': 'ring20', 'layout': 'full', 'dt': 0.05, 'horizon': 10000.0,
                             'record_stride': 10, 'record_multipliers': False},
                  'table3': {'problem': 'ring20', 'layout': 'reduced', 'dt': 0.01, 'horizon': 2000.0,
                             'record_stride': 5, 'record_multipliers': False}}
# published worst-case values, shown next to the computed ones and never used as test oracles outside the tables
published_values = {
    'table1': {'P(gamma=1)': {'overshoot_pct': 0.11, 'settle10': 3.54, 'settle1': 6.66, 'error_pct': 43.58},
               'P(fading)': {'overshoot_pct': 34.66, 'settle10': 103.73, 'settle1': 869.32, 'error_pct': 1.97},
               'I': {'overshoot_pct': 24.24, 'settle10': 5.61, 'settle1': 15.04, 'error_pct': 0.0},
               'PI': {'overshoot_pct': 14.95, 'settle10': 5.14, 'settle1': 13.19, 'error_pct': 0.0}},
    'table2': {'P(gamma=1)': {'overshoot_pct': 0.1, 'settle10': 120.8, 'settle1': 226.58, 'error_pct': 55.4},
               'P(fading)': {'overshoot_pct': 0.12, 'settle10': 659.42, 'settle1': 4884.8, 'error_pct': 0.92},
               'I': {'overshoot_pct': 37.5, 'settle10': 115.28, 'settle1': 542.71, 'error_pct': 0.0},
               'PI': {'overshoot_pct': 7.9, 'settle10': 29.78, 'settle1': 83.02, 'error_pct': 0.0}},
    'table3': {'P(gamma=1)': {'overshoot_pct': 0.1, 'settle10': 5.2, 'settle1': 9.47, 'error_pct': 57.48},
               'P(fading)': {'overshoot_pct': 35.15, 'settle10': 82.85, 'settle1': 692.57, 'error_pct': 5.3},
               'I': {'overshoot_pct': 7.12, 'settle10': 6.12, 'settle1': 12.78, 'error_pct': 0.0},
               'PI': {'overshoot_pct': 4.51, 'settle10': 6.03, 'settle1': 12.33, 'error_pct': 0.0}}}


class Scenario(object):
    """
    Class to handle one simulation: problem, topology, method, gains, layout, integrator and initial condition.
    """
    def __init__(self, name, problem, topology=None, method='pi', gains=None, layout=None, integrator=None,
                 initial=0.0, output=None):
        """
        Initialize and validate the scenario. Nothing is built or written here.

        :param name: name of the scenario, prefix of the run id
        :param problem: built-in name ('line3', 'ring20', 'ring20-reduced', 'pair2') or path of a problem JSON file
        :param topology: optional topology override, built-in name, path of a JSON file or dictionary
        :param method: 'p', 'i', 'pi' or 'pil'
        :param gains: gain block, e.g. {"kG": 1.0, "kP": 1.0, "kIp": 1.0}
        :param layout: 'full' or 'reduced', defaults to 'reduced' for 'ring20-reduced' and 'full' otherwise
        :param integrator: integrator block, e.g. {"scheme": "rk4", "dt": 0.01, "horizon": 2000}
        :param initial: initial z(0), scalar, vector of length n or full aggregate vector (mu(0) is always 0)
        :param output: optional output root directory
        """
        if not isinstance(name, str) or not name or os.sep in name:
            raise ValidationError('the scenario name should be a non-empty string without path separator')
        if not isinstance(problem, str):
            raise ValidationError('problem should be a built-in name or a file path')
        if problem not in builtin_problems and not os.path.isfile(problem):
            raise ValidationError('unknown problem %r: not a built-in (%s) nor an existing file'
                                  % (problem, ', '.join(builtin_problems)))
        if isinstance(topology, str) and topology not in gr.named_topologies and not os.path.isfile(topology):
            raise ValidationError('topology file not found: ' + topology)
        implied = 'reduced' if problem == 'ring20-reduced' else 'full'
        layout = implied if layout is None else layout
        if layout not in gr.layout_modes:
            raise ValidationError('layout should be "full" or "reduced", got ' + repr(layout))
        if problem == 'ring20-reduced' and layout != 'reduced':
            raise ValidationError('the ring20-reduced problem runs on the reduced layout')
        self.name = name
        self.problem = problem
        self.topology = topology
        self.gains = GainSchedule.from_dict(gains)
        self.layout = layout
        block = dict(integrator or {})
        block.setdefault('horizon', default_horizons.get(problem, 2000.0))
        self.integrator = simu.IntegratorConfig.from_dict(block)
        self.initial = initial.tolist() if isinstance(initial, np.ndarray) else initial
        try:
            initial_array = np.asarray(self.initial, dtype=float)
        except (TypeError, ValueError):
            raise ValidationError('initial should be a number or a list of numbers')
        if initial_array.ndim > 1 or not np.all(np.isfinite(initial_array)):
            raise ValidationError('initial should be a finite number or a flat list of finite numbers')
        self.output = output
        self.method = validate_method(method, self.gains, self.layout)

    @classmethod
    def from_dict(cls, block, base_dir=None):
        """
        Build a scenario from a JSON object, relative file paths are resolved from base_dir.
        """
        if not isinstance(block, dict):
            raise ValidationError('a scenario should be a JSON object')
        unknown = set(block) - set(scenario_keys)
        if unknown:
            raise ValidationError('unknown scenario keys: %s, expected some of %s' % (sorted(unknown), scenario_keys))
        if 'problem' not in block:
            raise ValidationError('the scenario needs a "problem"')
        block = deepcopy(block)
        if base_dir is not None:
            for key in ('problem', 'topology'):
                value = block.get(key)
                if isinstance(value, str) and value not in builtin_problems and value not in gr.named_topologies \
                        and not os.path.isabs(value):
                    block[key] = os.path.join(base_dir, value)
        block.setdefault('name', block['problem'] if block['problem'] in builtin_problems
                         else os.path.splitext(os.path.basename(block['problem']))[0])
        try:
            return cls(**block)
        except TypeError as err:
            raise ValidationError('malformed scenario: ' + str(err))

    @classmethod
    def from_file(cls, file_path):
        """
        Load a scenario JSON file, or the manifest.json of a previous run to run its scenario again.
        """
        block, extension = load_file(file_path)
        if extension != '.json':
            raise ValidationError('scenario files are JSON files')
        if isinstance(block, dict) and 'run_id' in block and isinstance(block.get('scenario'), dict):
            block = block['scenario']
        return cls.from_dict(block, base_dir=os.path.dirname(os.path.abspath(file_path)))

    @property
    def run_id(self):
        return self.name + '-' + canonical_hash(self.to_dict())

    def build(self):
        """
        Build the problem, the layout and the flow.

        :return: the SeparableCost, the AggregateLayout and the GradientFlow
        """
        if self.problem in ('line3', 'pair2'):
            cost, topology = {'line3': cu.build_line3, 'pair2': cu.build_pair2}[self.problem]()
        elif self.problem in ('ring20', 'ring20-reduced'):
            cost, topology, _ = cu.build_ring20()
        else:
            cost, topology = cu.load_problem(self.problem)
        if self.topology is not None:
            topology = gr.load_topology(self.topology)
        if topology is None:
            raise ValidationError('the problem %r defines no topology, add one to the scenario' % self.problem)
        if topology.node_count != cost.agent_count:
            raise ValidationError('the topology has %d nodes but the problem has %d agents'
                                  % (topology.node_count, cost.agent_count))
        if self.layout == 'full':
            layout = gr.aggregate_full(gr.build_incidence(topology), cost.variable_count)
        else:
            layout = gr.aggregate_reduced(topology, cu.dependency_map(cost))
        flow = GradientFlow(cost, MethodSpec(self.method, self.gains, layout))
        return cost, layout, flow

    def to_dict(self):
        return {'name': self.name, 'problem': self.problem, 'topology': self.topology, 'method': self.method,
                'gains': self.gains.to_dict(), 'layout': self.layout, 'integrator': self.integrator.to_dict(),
                'initial': self.initial}

    def __repr__(self):
        return 'Scenario(%s)' % self.to_dict()


class RunResult(object):
    """
    Outputs of a simulated scenario, before anything is written.
    """
    def __init__(self, scenario, cost, layout, flow, trajectory, oracle, metrics):
        self.scenario = scenario
        self.cost = cost
        self.layout = layout
        self.flow = flow
        self.trajectory = trajectory
        self.oracle = oracle
        self.metrics = metrics

    def certificates(self):
        """
        Final consensus and stationarity residuals (I and PI) and optimality gap.
        """
        final = self.trajectory.final_state()
        certificates = {'optimality_gap': pu.optimality_gap(final.z, self.oracle.x_star, self.layout),
                        'reason': self.trajectory.reason}
        if self.scenario.method in ('i', 'pi') and self.trajectory.mu is not None:
            consensus, stationarity = algo.kkt_residual(self.cost, self.layout, final.z, final.mu,
                                                        self.scenario.gains, self.trajectory.times[-1])
            certificates.update(consensus_residual=consensus, stationarity_residual=stationarity)
        else:
            certificates['consensus_residual'] = gr.consensus_residual(self.layout, final.z)
        return certificates


def simulate(scenario, verbose=False):
    """
    Build and integrate a scenario, then compute the oracle optimum and the metrics.

    :param scenario: the Scenario
    :param verbose: True to print the integration progress
    :return: the RunResult
    """
    cost, layout, flow = scenario.build()
    oracle = algo.solve_consensus_optimum(cost)
    initial = flow.initial_state(scenario.initial)
    if verbose:
        print('running', scenario.run_id, ':', method_labels[scenario.method], 'on', layout)
    trajectory = simu.integrate(flow, initial, scenario.integrator, verbose=verbose)
    metrics = pu.report(trajectory, layout, oracle.x_star)
    return RunResult(scenario, cost, layout, flow, trajectory, oracle, metrics)


def run(scenario, out=None, verbose=False):
    """
    Simulate a scenario and write trajectory.csv, metrics.csv, oracle.json and manifest.json in
    <out>/<run id>. The files are written in a temporary directory moved in place at the end, nothing is left
    behind on failure.

    :param scenario: the Scenario, or the path of a scenario JSON file
    :param out: output root, defaults to the scenario output, then GRADFLOW_OUT, then 'gradflow_output'
    :param verbose: True to print the progress
    :return: the RunResult and the path of the run directory
    """
    if isinstance(scenario, str):
        scenario = Scenario.from_file(scenario)
    root = out or scenario.output or output_root()
    result = simulate(scenario, verbose=verbose)

    os.makedirs(root, exist_ok=True)
    destination = os.path.join(root, scenario.run_id)
    staging = tempfile.mkdtemp(prefix='.' + scenario.run_id + '-', dir=root)
    try:
        result.trajectory.save(os.path.join(staging, 'trajectory.csv'))
        result.metrics.save(os.path.join(staging, 'metrics.csv'))
        oracle = result.oracle.to_dict()
        oracle['certificates'] = result.certificates()
        save_json(os.path.join(staging, 'oracle.json'), oracle)
        save_json(os.path.join(staging, 'manifest.json'),
                  {'run_id': scenario.run_id, 'version': gradflow.__version__, 'scenario': scenario.to_dict(),
                   'layout': result.layout.describe(), 'reason': result.trajectory.reason,
                   'worst_case': result.metrics.worst,
                   'files': ['trajectory.csv', 'metrics.csv', 'oracle.json', 'manifest.json']})
        if os.path.isdir(destination):
            shutil.rmtree(destination)
        os.replace(staging, destination)
    finally:
        if os.path.isdir(staging):
            shutil.rmtree(staging)
    if verbose:
        print('results saved in', destination)
    return result, destination


def table_scenarios(name, dt=None, horizon=None):
    """
    The four scenarios P(gamma=1), P(fading), I and PI of a comparison table.

    :param name: 'table1', 'table2' or 'table3'
    :param dt: optional time step replacing the default of the table
    :param horizon: optional horizon replacing the default of the table
    :return: list of (label, Scenario)
    """
    if name not in table_settings:
        raise ValidationError('unknown table %r, expected one of %s' % (name, sorted(table_settings)))
    settings = table_settings[name]
    dt = settings['dt'] if dt is None else dt
    horizon = settings['horizon'] if horizon is None else horizon
    # keep the sampling interval of the table when dt changes
    stride = max(1, int(round(settings['dt'] * settings['record_stride'] / dt)))
    scenarios = []
    for label, method, gains in table_columns:
        integrator = {'scheme': 'rk4', 'dt': dt, 'horizon': horizon, 'record_stride': stride,
                      'record_multipliers': settings['record_multipliers']}
        scenarios.append((label, Scenario(name + '-' + method_labels[method].lower() +
                                          ('-fading' if label == 'P(fading)' else ''),
                                          settings['problem'], method=method, gains=gains,
                                          layout=settings['layout'], integrator=integrator)))
    return scenarios


def _table_worker(scenario):
    return simulate(scenario).metrics


def table(name, dt=None, horizon=None, workers=4, out=None, verbose=False):
    """
    Run the four configurations of a comparison table and tabulate their worst-case metrics next to the
    published values. The table is written in <out>/<name>-<hash> as table.txt and table.csv.

    :param name: 'table1', 'table2' or 'table3'
    :param dt: optional time step
    :param horizon: optional horizon
    :param workers: number of worker processes, 1 to run sequentially
    :param out: output root, defaults to GRADFLOW_OUT or 'gradflow_output'
    :param verbose: True to print the progress
    :return: the text table, the dictionary label -> WorstCaseReport and the output directory
    """
    if workers < 1:
        raise ValidationError('workers should be at least 1')
    scenarios = table_scenarios(name, dt, horizon)
    labels = [label for label, _ in scenarios]
    if verbose:
        print('running', name, 'with', min(workers, len(scenarios)), 'worker(s)')
    if workers == 1:
        reports = [_table_worker(scenario) for _, scenario in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(scenarios))) as executor:
            reports = list(executor.map(_table_worker, [scenario for _, scenario in scenarios]))
    columns = dict(zip(labels, reports))
    text = pu.format_table(columns, published_values[name])

    root = out or output_root()
    destination = os.path.join(root, name + '-' + canonical_hash([scenario.to_dict() for _, scenario in scenarios]))
    os.makedirs(destination, exist_ok=True)
    with open(os.path.join(destination, 'table.txt'), 'w', encoding='utf-8') as f:
        f.write(text + '\n')
    with open(os.path.join(destination, 'table.csv'), 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['configuration', 'source'] + list(pu.metric_names))
        for label in labels:
            worst = columns[label].worst
            writer.writerow([label, 'computed'] + ['%.17g' % worst[metric] for metric in pu.metric_names])
            writer.writerow([label, 'published'] + [published_values[name][label][metric]
                                                    for metric in pu.metric_names])
    if verbose:
        print('table saved in', destination)
    return text, columns, destination


def plotdata(file_path, variable=None, agents=None, output=None):
    """
    Convert a trajectory CSV into a plot-ready long-format CSV with the columns time, series, value.
    The layout is read from the manifest.json next to the trajectory.

    :param file_path: path of trajectory.csv
    :param variable: index of the variable to select, None for all variables
    :param agents: optional list of agents
    :param output: path of the output CSV, defaults to plotdata.csv (plotdata_var<J>.csv) next to the trajectory
    :return: the path of the output CSV and the number of series
    """
    manifest_path = os.path.join(os.path.dirname(os.path.abspath(file_path)), 'manifest.json')
    if not os.path.isfile(manifest_path):
        raise ValidationError('no manifest.json next to ' + str(file_path) + ', the layout is unknown')
    manifest, _ = load_file(manifest_path)
    layout = gr.layout_from_description(manifest.get('layout', {}))
    trajectory = simu.Trajectory.load(file_path)
    rows = pu.long_format(trajectory, layout, variable, agents)
    if output is None:
        suffix = '' if variable is None else '_var%d' % variable
        output = os.path.join(os.path.dirname(os.path.abspath(file_path)), 'plotdata' + suffix + '.csv')
    with open(output, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['time', 'series', 'value'])
        writer.writerows((repr(float(time)), label, repr(float(value))) for time, label, value in rows)
    return output, len(set(label for _, label, _ in rows))
