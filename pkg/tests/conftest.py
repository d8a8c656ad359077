"""Shared fixtures.

The session-scoped ones at the bottom train real models and are shared by
the acceptance suite; unit-test modules stick to cheap local setups.
"""
from __future__ import annotations

from dataclasses import replace

import pytest

import tgl
from tgl.dataset import Dataset, PairSet, preprocess, split
from tgl.plant import (PlantConfig, generate_dataset_trials, generate_trial,
                       make_object, make_plant, object_catalog)
from tgl.topology import HandTopology, SensorNode
from tgl.training import TrainConfig, fit_pairs

# toy-scale training setup used everywhere a real model is needed quickly
TOY_ADAM = tgl.AdamConfig(learning_rate=1e-3)
TOY_GCN3 = tgl.ModelSpec("GCN", (14, 28, 56), (120, 50))


def build_tiny_topology() -> HandTopology:
    """Six nodes: two 2-node finger strips bridged to a 2-node palm."""
    nodes = [
        SensorNode(0, "proximal_lower", "f0", 0, 0),
        SensorNode(1, "fingertip", "f0", 1, 0),
        SensorNode(2, "proximal_lower", "f1", 0, 0),
        SensorNode(3, "fingertip", "f1", 1, 0),
        SensorNode(4, "palm", "palm", 0, 0),
        SensorNode(5, "palm", "palm", 1, 0),
    ]
    edges = [(0, 1), (2, 3), (4, 5), (0, 4), (2, 5)]
    return HandTopology(nodes, edges)


@pytest.fixture(scope="session")
def tiny_topo() -> HandTopology:
    return build_tiny_topology()


@pytest.fixture(scope="session")
def small_topo() -> HandTopology:
    return tgl.build_small_hand()


@pytest.fixture(scope="session")
def default_topo() -> HandTopology:
    return tgl.build_default_hand()


@pytest.fixture(scope="session")
def overfit_fixture() -> dict:
    """One noise-free object, two demonstrations, a model overfit to them."""
    topo = tgl.build_small_hand()
    pcfg = PlantConfig()
    obj = make_object(heavy=False, soft=False, slippery=False, cfg=pcfg, name="fixture")
    pl = make_plant(topo, obj, pcfg)
    trials = [generate_trial(pl, seed=s, length=700) for s in (0, 1)]
    ds = Dataset([preprocess(t) for t in trials], target_length=330)
    tr, va = split(ds, seed=0)
    params = tgl.build_from_spec(TOY_GCN3, topo, seed=0)
    report = fit_pairs(
        params, PairSet(tr), PairSet(va),
        TrainConfig(spec=TOY_GCN3, epochs=300, batch_size=100, seed=0, adam=TOY_ADAM))
    return {"topo": topo, "pcfg": pcfg, "obj": obj, "plant": pl, "ds": ds,
            "spec": TOY_GCN3, "params": params, "report": report}


@pytest.fixture(scope="session")
def catalog_fixture() -> dict:
    """Noisy eight-object dataset and a 5-seed sweep of three model families.

    Everything is seeded, so the validation losses recorded here are exact
    constants of the codebase.
    """
    topo = tgl.build_small_hand()
    pcfg = replace(PlantConfig(), sensor_noise=0.15)
    trials = generate_dataset_trials(topo, object_catalog(pcfg), 3,
                                     seed=11, length=700, cfg=pcfg)
    ds = Dataset([preprocess(t) for t in trials], target_length=330)
    specs = {
        "gcn3": TOY_GCN3,
        "gcn1": tgl.ModelSpec("GCN", (56,), (120, 50)),
        "mlp": tgl.ModelSpec("MLP", (), (512, 256)),
    }
    val = {}
    trained_gcn3 = None
    for name, spec in specs.items():
        for seed in range(5):
            tr, va = split(ds, seed=seed)
            params = tgl.build_from_spec(spec, topo, seed=seed)
            report = fit_pairs(
                params, PairSet(tr), PairSet(va),
                TrainConfig(spec=spec, epochs=50, batch_size=100, seed=seed,
                            adam=TOY_ADAM))
            val[(name, seed)] = report.val_losses[-1]
            if name == "gcn3" and seed == 0:
                trained_gcn3 = params
    return {"topo": topo, "pcfg": pcfg, "ds": ds, "specs": specs, "val": val,
            "trained_gcn3": trained_gcn3}
