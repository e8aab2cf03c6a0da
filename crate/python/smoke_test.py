"""Smoke test for the vesseltree Python bindings.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import json
import math
import tempfile
from pathlib import Path

import numpy as np

import vesseltree as vt


def check(cond, msg):
    if not cond:
        raise AssertionError(msg)
    print(f"ok  {msg}")


def main():
    check(abs(vt.angular_distance(0.1, math.pi - 0.1) - 0.2) < 1e-12, "angular distance wraps at pi")

    spec = vt.GridSpec(24, 24, 16)
    check(len(spec) == 24 * 24 * 16 and abs(spec.theta(4) - math.pi / 4) < 1e-12, "grid spec")

    # Flat cost: the distance along the x axis equals the Euclidean length.
    flat = vt.LiftedField.filled(spec, 1.0)
    d = vt.solve_distance(flat, (4.0, 12.0, 0.0))
    u = np.array(d.values()).reshape(d.shape)
    check(abs(u[14, 12, 0] - 10.0) < 0.2, f"flat distance {u[14, 12, 0]:.3f} ~ 10")
    oracle = vt.dijkstra_oracle(flat, (4.0, 12.0, 0.0))
    check(abs(oracle.get(14, 12, 0) - 10.0) < 0.2, "oracle agrees on flat cost")

    path = vt.geodesic(flat, (4.0, 12.0, 0.0), (16.0, 12.0, 0.0))
    check(abs(path["length"] - 12.0) < 0.6 and len(path["points"]) > 2, f"geodesic length {path['length']:.3f}")

    with tempfile.TemporaryDirectory() as tmp:
        p = Path(tmp) / "u.lft"
        d.save(p)
        back = vt.LiftedField.load(p)
        check(back.shape == d.shape and abs(back.get(14, 12, 0) - d.get(14, 12, 0)) < 1e-4, "LFT1 round trip")

    # Synthetic scene -> lift -> cost -> pairwise distances -> clusters -> MST.
    scene = vt.synth_generate({"seed": 4, "width": 64, "height": 64, "n_trees": 1, "depth": 2,
                               "length_range": [15, 25]})
    img = np.array(scene["image"])
    check(img.shape == (64, 64) and len(scene["landmarks"]) == 4, "synthetic Y scene")

    vess = np.array(vt.frangi_vesselness(img, {"scales": [1.0, 2.0]}))
    check(0.0 <= vess.min() and vess.max() <= 1.0, "frangi vesselness in [0, 1]")

    gspec = vt.GridSpec(64, 64, 16)
    score, degenerate = vt.lift_image(img, gspec)
    lo, hi = score.min_max()
    check(not degenerate and lo == 0.0 and abs(hi - 1.0) < 1e-12, "lift normalized to [0, 1]")
    cost = vt.cost_from_score(score)
    nodes = [(lm["x"], lm["y"], 0.0) for lm in scene["landmarks"]]
    sym, raw = vt.pairwise_distances(cost, nodes)
    check(all(sym[i][j] == sym[j][i] for i in range(4) for j in range(4)), "symmetrized matrix")
    labels = vt.cluster_landmarks(sym, 1e9)
    check(labels == [0, 0, 0, 0], "single cluster at large threshold")
    tree = vt.minimal_spanning_tree(sym)
    check(len(tree) == 3, "spanning tree has n - 1 edges")

    # Heatmap targets -> extraction -> scoring.
    hm = vt.heatmap_targets(scene["landmarks"], 64, 64)
    found = vt.extract_landmarks(hm)
    rep = vt.match_and_score(found, scene["landmarks"])
    check(rep["aggregate"]["f1"] == 1.0, "heatmap round trip F1 = 1")

    # Trajectories along x produce a horizontal orientation peak.
    tracks = [{"track_id": 1, "points": [{"x": x, "y": 12.0, "vx": 1.0, "vy": 0.0, "t": x} for x in range(2, 22)]}]
    ulm = vt.build_ulm_score(tracks, spec)
    col = [ulm.get(12, 12, k) for k in range(16)]
    check(int(np.argmax(col)) == 0, "ULM peak at theta = 0")

    try:
        vt.cluster_landmarks(sym, 0.0)
    except ValueError as e:
        check("s_cluster" in str(e), "config errors raise ValueError")
    else:
        raise AssertionError("expected ValueError")

    with tempfile.TemporaryDirectory() as tmp:
        Path(tmp, "landmarks.json").write_text(json.dumps(scene["landmarks"]))
        np_img = (img * 255).astype(np.uint8)
        # Write a binary PGM so the example has no imaging dependency.
        with open(Path(tmp, "image.pgm"), "wb") as f:
            f.write(b"P5 64 64 255\n" + np_img.tobytes())
        report = vt.run_pipeline({
            "image": str(Path(tmp, "image.pgm")),
            "landmarks": str(Path(tmp, "landmarks.json")),
            "output_dir": str(Path(tmp, "out")),
            "grid": {"n_theta": 16},
            "s_cluster": "auto",
        })
        check(report["n_clusters"] >= 1 and Path(tmp, "out", "trees.json").exists(), "pipeline run")

    print("all smoke tests passed")


if __name__ == "__main__":
    main()
