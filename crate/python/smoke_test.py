"""Smoke test for the imitlab_py extension.

Build and run:
    cargo build -p imitlab-py --features extension-module --release
    cp target/release/libimitlab_py.so python/imitlab_py.so
    python3 python/smoke_test.py
"""
import json
import os
import random

import imitlab_py as il


def blobs(n, shift, rng):
    xs, ys = [], []
    for _ in range(n):
        y = rng.randrange(2)
        centre = 2.0 if y else -2.0
        xs.append([centre + rng.gauss(0, 1), rng.gauss(0, 1) + shift, rng.gauss(0, 1)])
        ys.append(y)
    return xs, ys


def main():
    rng = random.Random(0)
    assert il.fnv1a_64("good") == 0x9CE4D6720E9C9118
    v = il.featurize("Good movie good", dim=64)
    assert len(v) == 64 and v[24] == 2.0 and v[15] == 1.0

    src_x, src_y = blobs(600, 0.0, rng)
    tgt_x, tgt_y = blobs(600, 1.5, rng)
    victim = il.Model.train(src_x, src_y, 2, kind="mlp", hidden_dim=4, seed=1)
    assert victim.accuracy(src_x, src_y) > 0.95

    restored = il.Model.from_bytes(victim.to_bytes())
    assert restored.predict(tgt_x[0]) == victim.predict(tgt_x[0])

    endpoints = [
        il.VictimEndpoint(victim, price_per_query="0.001", seed=1, name="a"),
        il.VictimEndpoint(victim, defense="gaussian", sigma=0.1, price_per_query="0.002", seed=2, name="b"),
    ]
    attacker = il.imitate(endpoints, tgt_x[:300], strategy="concat", label_mode="soft", seed=3)
    acc = attacker.accuracy(tgt_x[300:], tgt_y[300:])
    assert acc > 0.8, acc
    assert [e.query_count for e in endpoints] == [300, 300]
    assert endpoints[0].total_cost == "0.300" and endpoints[1].total_cost == "0.600"

    assert abs(il.tv_distance([0.5, 0.5], [0.8, 0.2]) - 0.3) < 1e-12
    cost = il.cost_report(9613, "0.0005", "0.05")
    assert cost["human_cost"] == "480.65" and cost["ratio"] == "100", cost

    config = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "configs", "tabular_bound.toml")
    with open(config) as f:
        report = json.loads(il.run_experiment_toml(f.read()))
    assert all(s["error"] is None for s in report["seeds"])

    try:
        il.imitate(endpoints, tgt_x[:5], strategy="average", label_mode="hard")
    except ValueError:
        pass
    else:
        raise AssertionError("average with hard labels must be rejected")

    print(f"ok: attacker target accuracy {acc:.3f}, {len(report['seeds'])} seeds run")


if __name__ == "__main__":
    main()
