"""Hand graphs and the normalized propagation operator."""
from __future__ import annotations

import importlib.resources
import json
from collections import deque

import numpy as np
import pytest

import tgl
from tgl.topology import (HandTopology, SensorNode, load_topology, normalize_adjacency,
                          propagation_for, save_topology, spectral_norm_bound)

from conftest import build_tiny_topology


def bfs_component_count(adj: np.ndarray) -> int:
    n = adj.shape[0]
    seen = [False] * n
    parts = 0
    for start in range(n):
        if seen[start]:
            continue
        parts += 1
        queue = deque([start])
        seen[start] = True
        while queue:
            u = queue.popleft()
            for v in np.nonzero(adj[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(int(v))
    return parts


def test_default_hand_counts():
    topo = tgl.build_default_hand()
    assert topo.n == 384
    assert len(topo.edges) == 668
    # 4 fingertip patches of 24 elements; 11 phalanx and 7 palm patches of 16
    tips = sum(1 for i in range(topo.n) if topo.segment_of(i) == "fingertip")
    assert tips == 4 * 24
    palm = sum(1 for i in range(topo.n) if topo.finger_of(i) == "palm")
    assert palm == 7 * 16
    assert topo.n - tips - palm == 11 * 16


def test_default_hand_connected():
    topo = tgl.build_default_hand()
    assert bfs_component_count(topo.adjacency()) == 1


def test_small_hand_counts_and_connectivity():
    topo = tgl.build_small_hand()
    assert topo.n == 24
    assert len(topo.edges) == 34
    assert bfs_component_count(topo.adjacency()) == 1


def test_grid_degree_bounds():
    topo = tgl.build_default_hand()
    deg = topo.adjacency().sum(axis=1)
    assert deg.min() >= 2
    assert deg.max() <= 5  # grid interior plus at most one bridge


def test_two_node_propagation_exact():
    nodes = [SensorNode(0, "palm", "palm", 0, 0), SensorNode(1, "palm", "palm", 0, 1)]
    topo = HandTopology(nodes, [(0, 1)])
    s = propagation_for(topo).s
    assert s.tolist() == [[0.5, 0.5], [0.5, 0.5]]


def test_propagation_symmetric_and_contractive(default_topo):
    prop = propagation_for(default_topo)
    assert np.array_equal(prop.s, prop.s.T)
    assert spectral_norm_bound(prop.s) <= 1.0 + 1e-10
    # row sums of the self-looped adjacency drive the normalization
    np.testing.assert_array_equal(prop.d_hat, prop.a_hat.sum(axis=1))


def test_isolated_node_keeps_self_loop_weight_one():
    adj = np.zeros((3, 3))
    adj[0, 1] = adj[1, 0] = 1.0
    prop = normalize_adjacency(adj)
    assert prop.s[2, 2] == 1.0
    assert prop.s[2, 0] == 0.0


def test_normalize_adjacency_validation():
    with pytest.raises(ValueError):
        normalize_adjacency(np.ones((2, 3)))
    asym = np.zeros((2, 2))
    asym[0, 1] = 1.0
    with pytest.raises(ValueError):
        normalize_adjacency(asym)
    loop = np.eye(2)
    with pytest.raises(ValueError):
        normalize_adjacency(loop)
    weighted = np.zeros((2, 2))
    weighted[0, 1] = weighted[1, 0] = 0.5
    with pytest.raises(ValueError):
        normalize_adjacency(weighted)


def test_topology_validation_errors():
    nodes = [SensorNode(0, "palm", "palm", 0, 0), SensorNode(1, "palm", "palm", 0, 1)]
    with pytest.raises(ValueError):
        HandTopology(nodes, [(0, 0)])  # self loop
    with pytest.raises(ValueError):
        HandTopology(nodes, [(0, 1), (1, 0)])  # duplicate, reversed
    with pytest.raises(ValueError):
        HandTopology(nodes, [(0, 2)])  # out of range
    bad = [SensorNode(0, "palm", "palm", 0, 0), SensorNode(2, "palm", "palm", 0, 1)]
    with pytest.raises(ValueError):
        HandTopology(bad, [])  # ids must be 0..n-1 in order


def test_neighbors_and_labels(tiny_topo):
    assert sorted(tiny_topo.neighbors(0)) == [1, 4]
    assert tiny_topo.segment_of(1) == "fingertip"
    assert tiny_topo.finger_of(4) == "palm"


def test_json_round_trip(tmp_path, small_topo):
    path = tmp_path / "hand.json"
    save_topology(small_topo, str(path))
    loaded = load_topology(str(path))
    assert loaded.n == small_topo.n
    assert loaded.edges == small_topo.edges
    assert all(loaded.segment_of(i) == small_topo.segment_of(i) for i in range(loaded.n))
    assert all(loaded.finger_of(i) == small_topo.finger_of(i) for i in range(loaded.n))


def test_json_rejects_malformed(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"nodes": [], "edges": []}))
    with pytest.raises(ValueError):
        load_topology(str(path))
    doc = {"nodes": [{"id": 0.5, "segment": "palm", "finger": "palm",
                      "row": 0, "col": 0}], "edges": []}
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_topology(str(path))


def test_packaged_default_hand_matches_builder(default_topo):
    res = importlib.resources.files("tgl") / "data" / "allegro_uskin_384.json"
    with importlib.resources.as_file(res) as path:
        shipped = load_topology(str(path))
    assert shipped.n == default_topo.n
    assert shipped.edges == default_topo.edges
    assert all(shipped.segment_of(i) == default_topo.segment_of(i)
               for i in range(shipped.n))


def test_tiny_topology_propagation_properties():
    topo = build_tiny_topology()
    prop = propagation_for(topo)
    assert np.array_equal(prop.s, prop.s.T)
    assert spectral_norm_bound(prop.s) <= 1.0 + 1e-10
    # numpy's dense SVD agrees with the power-iteration bound
    top = float(np.linalg.svd(prop.s, compute_uv=False)[0])
    assert spectral_norm_bound(prop.s) == pytest.approx(top, abs=1e-8)
