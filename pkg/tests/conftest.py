# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers

import pytest
import gradflow.costs.costs_utils as cu
import gradflow.graph.graph_utils as gr


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: long-horizon reproductions of the comparison tables')


@pytest.fixture
def line3():
    cost, topology = cu.build_line3()
    layout = gr.aggregate_full(gr.build_incidence(topology), cost.variable_count)
    return cost, topology, layout


@pytest.fixture
def ring20_reduced():
    cost, topology, dependency = cu.build_ring20()
    return cost, topology, gr.aggregate_reduced(topology, dependency)


@pytest.fixture
def ring20_full():
    cost, topology, _ = cu.build_ring20()
    return cost, topology, gr.aggregate_full(gr.build_incidence(topology), cost.variable_count)


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv('GRADFLOW_OUT', str(tmp_path / 'out'))
    return tmp_path / 'out'
