"""Shared fixtures plus the acceptance-gate summary printer."""

import numpy as np
import pytest

from laneseq import Centerline, DEFAULT_CONFIG, LaneGraph, Point3


@pytest.fixture
def cfg():
    return DEFAULT_CONFIG


def make_straight_lane(x0, y0, x1, y1, n=10, z0=0.0, z1=0.0):
    """A lane whose n points are evenly spaced on the segment (x0,y0)-(x1,y1)."""
    ts = np.linspace(0.0, 1.0, n)
    return Centerline([
        Point3(x0 + t * (x1 - x0), y0 + t * (y1 - y0), z0 + t * (z1 - z0))
        for t in ts
    ])


def make_lanegraph(lanes, pairs=(), scores=None):
    """LaneGraph from lanes plus sparse (i, j) connectivity pairs."""
    m = len(lanes)
    adj = np.zeros((m, m))
    for i, j in pairs:
        adj[i, j] = 1.0
    return LaneGraph(lanes, adj, scores)


@pytest.fixture
def straight_lane():
    return make_straight_lane


@pytest.fixture
def lanegraph():
    return make_lanegraph


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(label): release-gate criterion, one verdict line at the end"
    )
    config._acceptance_labels = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        marker = item.get_closest_marker("acceptance")
        if marker is not None:
            config._acceptance_labels[item.nodeid] = marker.args[0]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    labels = getattr(config, "_acceptance_labels", {})
    if not labels:
        return
    outcome = {}
    for reports in terminalreporter.stats.values():
        for rep in reports:
            nodeid = getattr(rep, "nodeid", None)
            if nodeid not in labels:
                continue
            if getattr(rep, "failed", False):
                outcome[nodeid] = "FAIL"
            elif getattr(rep, "passed", False) and getattr(rep, "when", "") == "call":
                outcome.setdefault(nodeid, "PASS")
    terminalreporter.write_sep("-", "acceptance gate")
    for nodeid, label in sorted(labels.items(), key=lambda kv: kv[1]):
        terminalreporter.write_line(f"ACCEPTANCE {outcome.get(nodeid, 'FAIL')}: {label}")
