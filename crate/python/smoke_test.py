#!/usr/bin/env python3
"""Smoke test for the uwb_snn_py extension module.

Builds nothing itself: run `cargo build --release -p uwb-snn-python`
first, then `python3 python/smoke_test.py`. The script locates the
compiled extension in target/release (or target/debug), imports it, and
exercises every exposed type end to end on small inputs.
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    for profile in ("release", "debug"):
        built = REPO / "target" / profile / "libuwb_snn_py.so"
        if built.exists():
            stage = Path(tempfile.mkdtemp(prefix="uwb_snn_py_"))
            shutil.copy2(built, stage / "uwb_snn_py.so")
            sys.path.insert(0, str(stage))
            import uwb_snn_py

            print(f"imported uwb_snn_py {uwb_snn_py.__version__} ({profile} build)")
            return uwb_snn_py
    sys.exit(
        "extension not built — run: cargo build --release -p uwb-snn-python"
    )


def main():
    m = import_module()

    # Rate encoder: deterministic per seed, silent at 0, saturated at 1.
    train = m.encode([0.0, 0.5, 1.0], steps=200, max_rate=1.0, seed=7)
    assert (train.steps, train.channels) == (200, 3)
    counts = train.channel_counts()
    assert counts[0] == 0, "input 0 must stay silent"
    assert counts[2] == 200, "input 1 at max_rate 1 must fire every step"
    assert 60 < counts[1] < 140, f"input 0.5 count {counts[1]} implausible"
    again = m.encode([0.0, 0.5, 1.0], steps=200, max_rate=1.0, seed=7)
    assert again.channel_counts() == counts, "same seed must encode identically"
    round_trip = m.SpikeTrain.from_events(train.to_events(), 200, 3)
    assert round_trip.channel_counts() == counts
    print(f"encoder ok: counts {counts}")

    # LIF neurons: threshold crossing and soft reset.
    neurons = m.LifNeurons(2, tau_m=20.0, theta=1.0)
    fired = neurons.step([1.5, 0.2])
    assert fired == [0], f"only the driven neuron may fire, got {fired}"
    v = neurons.potentials()
    assert abs(v[0] - 0.5) < 1e-12, "soft reset keeps the overshoot"
    assert abs(v[1] - 0.2) < 1e-12
    print(f"lif ok: potentials after spike {v}")

    # Reservoir: deterministic wiring, activity in, activity out.
    liquid = m.Liquid(3, n_neurons=50, seed=1, input_budget=2.0)
    assert liquid.weights_hash() == m.Liquid(3, n_neurons=50, seed=1, input_budget=2.0).weights_hash()
    stats = liquid.stats()
    assert stats["n_excitatory"] == 40
    echoed = liquid.run(train)
    assert echoed.channels == 50 and echoed.steps == 200
    assert sum(liquid.counts(train)) == echoed.total_spikes() > 0
    print(f"liquid ok: {stats['recurrent_connections']} recurrent connections, "
          f"{echoed.total_spikes()} output spikes")

    # Map: unsupervised training separates two pattern families, labels
    # name the neurons, classification generalizes to fresh encodings.
    def pattern(family, seed):
        values = [0.9 if (i < 6) == (family == 0) else 0.05 for i in range(12)]
        return m.encode(values, steps=80, max_rate=0.5, seed=seed)

    som = m.SpikingSom(12, rows=2, cols=2, steps=80, epochs=4, seed=5)
    patterns = [pattern(i % 2, 100 + i) for i in range(12)]
    labels = [i % 2 for i in range(12)]
    report = som.train(patterns)
    assert report["epochs_run"] == 4
    assert sum(report["winner_counts"]) == 4 * len(patterns)
    som.assign_labels(patterns, labels)
    assigned = som.neuron_labels()
    assert set(x for x in assigned if x is not None) == {0, 1}
    hits = sum(som.classify(pattern(f, 900 + f)) == f for f in (0, 1))
    assert hits == 2, "trained map must classify both familiar families"
    with tempfile.TemporaryDirectory() as d:
        path = str(Path(d) / "map.json")
        som.save(path)
        loaded = m.SpikingSom.load(path)
        assert loaded.weights_hash() == som.weights_hash()
        assert loaded.classify(pattern(1, 901)) == som.classify(pattern(1, 901))
    print(f"som ok: neuron labels {assigned}")

    # Metrics: the worked confusion example.
    scored = m.compute_metrics([1, 1, 0, 0], [1, 0, 1, 0])
    assert (scored["tp"], scored["fn"], scored["fp"], scored["tn"]) == (1, 1, 1, 1)
    assert scored["accuracy"] == 0.5
    print("metrics ok")

    # Strategy matrix and a miniature end-to-end evaluation.
    matrix = m.strategy_matrix()
    assert [s["id"] for s in matrix] == list(range(1, 11))
    assert matrix[0]["rf_liquid"] and matrix[0]["cir_liquid"]
    manifest = json.loads(m.evaluate_synthetic(n=150, strategy_ids=[6], seeds=[1, 2]))
    (result,) = manifest["results"]
    assert result["strategy_id"] == 6
    assert len(result["per_seed"]) == 2
    assert 0.0 <= result["accuracy_mean"] <= 1.0
    assert manifest["dataset"]["rows_used"] == 150
    print(f"evaluation ok: S6 accuracy {result['accuracy_mean']:.3f} "
          f"over seeds {manifest['seeds']}")

    print("smoke test passed")


if __name__ == "__main__":
    main()
