#!/usr/bin/env python3
"""Smoke test for the memdex Python extension.

Builds nothing itself: it locates the compiled cdylib under target/
(release preferred), exposes it as an importable module, and drives a small
synth -> score -> evaluate pipeline.

Usage:
    cargo build --release -p memdex-py
    python3 python/smoke_test.py
"""

import math
import os
import shutil
import sys
import tempfile


def locate_library(repo_root: str) -> str:
    override = os.environ.get("MEMDEX_PY_LIB")
    if override:
        return override
    names = {"linux": "libmemdex.so", "darwin": "libmemdex.dylib", "win32": "memdex.dll"}
    libname = names.get(sys.platform, "libmemdex.so")
    candidates = [
        os.path.join(repo_root, "target", profile, libname)
        for profile in ("release", "debug")
    ]
    for path in candidates:
        if os.path.exists(path):
            return path
    sys.exit(
        "could not find the compiled extension; run "
        "`cargo build --release -p memdex-py` first (looked at: %s)" % ", ".join(candidates)
    )


def main() -> None:
    repo_root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    lib = locate_library(repo_root)
    stage = tempfile.mkdtemp(prefix="memdex_py_")
    shutil.copy(lib, os.path.join(stage, "memdex.so"))
    sys.path.insert(0, stage)

    import memdex

    # corpus generation and persistence
    ds = memdex.generate_synthetic(
        seed=7, families=12, members=2, keypoints=20,
        family_signal=0.9, group_signal=0.8,
    )
    assert len(ds) == 24, len(ds)
    assert ds.d_kp == 8 and ds.d_dv == 16
    manifest = ds.save(os.path.join(stage, "corpus"))
    reloaded = memdex.Dataset.load(manifest)
    assert reloaded.subject_ids == ds.subject_ids
    print("dataset round trip: OK (%d subjects)" % len(ds))

    # nearest-neighbor index
    idx = memdex.Index.build(ds, which="keypoints", exact=True)
    assert len(idx) == 24 * 20
    hits = idx.knn([0.0] * ds.d_kp, k=3)
    assert len(hits) == 3 and hits[0][1] <= hits[1][1] <= hits[2][1]
    print("index knn: OK (nearest distance %.4f)" % hits[0][1])

    # all-pairs scoring and family ROC
    sm = memdex.all_pairs_scores(ds, protocol="family", mode="fused", exact=True)
    assert sm.protocol == "family"
    roc = memdex.family_auc(sm, ds, mode="fused", alpha=0.5)
    assert 0.5 < roc.auc <= 1.0, roc.auc
    assert roc.points[0] == (0.0, 0.0) and roc.points[-1] == (1.0, 1.0)
    print("family AUC: OK (%.4f, %d pos / %d neg)" % (roc.auc, roc.positives, roc.negatives))

    # group protocol
    smg = memdex.all_pairs_scores(ds, protocol="group", mode="deep", exact=True)
    rocg = memdex.group_auc(smg, ds, mode="deep")
    assert 0.0 <= rocg.auc <= 1.0
    print("group AUC: OK (%.4f)" % rocg.auc)

    # alpha sweep endpoints
    points, best_alpha, best_auc = memdex.alpha_sweep(ds, grid_step=0.5, exact=True)
    assert [a for a, _ in points] == [0.0, 0.5, 1.0]
    assert 0.0 <= best_alpha <= 1.0 and best_auc <= 1.0
    print("alpha sweep: OK (best alpha %.2f, auc %.4f)" % (best_alpha, best_auc))

    # independence diagnostic
    r = memdex.independence_diagnostic(sm)
    assert -1.0 <= r <= 1.0
    print("independence diagnostic: OK (r=%.4f)" % r)

    # binarization
    table = memdex.fit_thresholds(ds, class_by="group")
    assert len(table) == ds.d_dv
    assert all(0.0 <= g <= 1.0 for g in table.gains)
    binarized = memdex.apply_thresholds(ds, table)
    smb = memdex.all_pairs_scores(binarized, protocol="group", mode="deep", exact=True)
    rocb = memdex.group_auc(smb, ds, mode="deep")
    print("binarized group AUC: OK (%.4f)" % rocb.auc)

    # scalar helpers
    assert math.isclose(memdex.entropy_bits([1, 1]), 1.0)
    assert math.isclose(memdex.fuse(2.0, 4.0, alpha=0.25), 3.5)
    perfect = memdex.roc_auc([0.9, 0.8, 0.2, 0.1], [True, True, False, False])
    assert perfect.auc == 1.0
    print("scalar helpers: OK")

    # score matrix persistence
    path = os.path.join(stage, "scores.csv")
    sm.save(path, alpha=0.5)
    back = memdex.ScoreMatrix.load(path)
    assert back.query_ids == sm.query_ids
    assert back.shallow(0, 1) == sm.shallow(0, 1)
    print("score matrix round trip: OK")

    print("smoke test: PASS")


if __name__ == "__main__":
    main()
