"""Smoke test for the diffq extension module.

Build and run from the workspace root:

    cargo build --release -p diffusion-quality-py --features extension-module
    cp target/release/libdiffq.so crates/python/python/diffq.so
    python3 crates/python/python/smoke_test.py
"""

import json
import math
import os
import random
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import diffq


def check_stats():
    assert abs(diffq.pearson([1, 2, 3, 4], [2, 4, 6, 8]) - 1.0) < 1e-12
    assert abs(diffq.r_squared([1, 2, 3], [1, 2, 3]) - 1.0) < 1e-12
    t, df, p = diffq.welch_t([1, 2, 3, 4], [3, 4, 5, 6])
    assert t < 0 and 0 < p < 1 and df > 0
    d, label = diffq.cohens_d([1, 2, 3, 4], [3, 4, 5, 6])
    assert d < 0 and isinstance(label, str)
    alpha, sig, _ = diffq.bonferroni([0.001, 0.2], 0.05)
    assert alpha == 0.025 and sig == [True, False]
    assert abs(diffq.timeliness([1, 3, 6], 1.0) - (6 / 2 - 2)) < 1e-12


def check_communities():
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]
    assignment, q = diffq.fast_greedy(6, edges)
    assert len(set(assignment)) == 2 and q > 0.3


def check_gam():
    rng = random.Random(3)
    a = [rng.uniform(0, 1) for _ in range(400)]
    b = [rng.uniform(0, 1) for _ in range(400)]
    y = [math.sin(6 * u) + v * v for u, v in zip(a, b)]
    cols = {"a": a, "b": b}
    model = diffq.GamModel.fit(cols, y, basis_dim=8, lam=1e-3, interactions=False)
    assert model.features == ["a", "b"]
    pred = model.predict(cols)
    assert diffq.r_squared(y, pred) > 0.99
    again = diffq.GamModel.from_json(model.to_json())
    assert again.predict(cols) == pred
    pd = model.partial_dependence(cols, "a", [0.2, 0.5])
    gap = pd[1] - pd[0]
    assert abs(gap - (model.smooth_value("a", 0.5) - model.smooth_value("a", 0.2))) < 1e-9
    assert model.diagnostics["n_obs"] == 400


def check_corpus_and_pipeline():
    corpus, latents = diffq.Corpus.synthetic(n_papers=600, seed=7)
    assert len(corpus) == 600 and len(latents) == 600
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "c.jsonl")
        corpus.write_canonical(path)
        back = diffq.Corpus.load_canonical(path)
        assert back.ids() == corpus.ids()
    graph = diffq.CitationGraph(corpus)
    assert graph.n_nodes == 600 and graph.n_edges > 0
    pid = corpus.ids()[0]
    year = corpus.papers()[0]["year"]
    assert len(graph.gain_trajectory(pid, year + 3)) == 4
    feats = graph.features(corpus.ids()[:5], 2014)
    assert len(feats) == 5
    reports = diffq.run_pipeline(corpus, [5], seed=1)
    assert reports[0]["window_years"] == 5
    print(json.dumps({"pearson_r": round(reports[0]["pearson_r"], 4)}))
    try:
        diffq.pearson([1.0], [2.0, 3.0])
    except ValueError:
        pass
    else:
        raise AssertionError("length mismatch should raise")


if __name__ == "__main__":
    check_stats()
    check_communities()
    check_gam()
    check_corpus_and_pipeline()
    print("smoke test passed")
