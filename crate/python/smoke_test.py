#!/usr/bin/env python3
"""Smoke test for the cnf_epi_py extension module.

Builds the extension with cargo (maturin is not required), loads it from
the target directory, and exercises the main types end to end. Exits
nonzero on the first failure.

Usage: python3 python/smoke_test.py [--release]
"""

import math
import shutil
import subprocess
import sys
import sysconfig
from pathlib import Path

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_extension(release: bool) -> Path:
    """Compile the cdylib and stage it under python/_build with the
    import name Python expects."""
    profile = "release" if release else "debug"
    cmd = ["cargo", "build", "-p", "cnf-epi-py"]
    if release:
        cmd.append("--release")
    subprocess.run(cmd, cwd=REPO_ROOT, check=True)

    built = REPO_ROOT / "target" / profile / "libcnf_epi_py.so"
    if not built.exists():  # e.g. macOS
        built = REPO_ROOT / "target" / profile / "libcnf_epi_py.dylib"
    if not built.exists():
        sys.exit(f"built extension not found under target/{profile}/")

    stage = REPO_ROOT / "python" / "_build"
    stage.mkdir(exist_ok=True)
    suffix = sysconfig.get_config_var("EXT_SUFFIX") or ".so"
    staged = stage / f"cnf_epi_py{suffix}"
    shutil.copy2(built, staged)
    return stage


def check(condition: bool, message: str) -> None:
    if not condition:
        sys.exit(f"FAIL: {message}")
    print(f"ok: {message}")


def main() -> None:
    release = "--release" in sys.argv[1:]
    stage = build_extension(release)
    sys.path.insert(0, str(stage))
    import cnf_epi_py as m

    # Tokenization.
    tokens = m.tokenize("I have never had the flu!")
    check(tokens == ["i", "have", "never", "had", "the", "flu"], f"tokenize -> {tokens}")

    # The fixed transcript in both rewrite modes.
    plain = m.transform_text("I have never had the flu!")
    check(
        plain == ["SELF_REF", "HAVE", "FREQUENCY", "HAVE", "THE", "OOV"],
        f"plain rewrite -> {plain}",
    )
    padded = m.transform_text("I have never had the flu!", mode="pos-padded")
    check(
        padded == ["SELF_REF", "HAVE", "FREQUENCY", "HAVE", "THE", "NN"],
        f"tag-padded rewrite -> {padded}",
    )

    # Ontology object and the low-level rewrites.
    ontology = m.Ontology.starter()
    check(ontology.concept_count > 0 and ontology.word_count > 0, repr(ontology))
    check(ontology.lookup("flu") is None, "'flu' is deliberately absent")
    check(ontology.lookup("never") == "FREQUENCY", "'never' maps to FREQUENCY")
    reparsed = m.Ontology.parse(ontology.to_text())
    check(
        reparsed.concept_count == ontology.concept_count,
        "ontology text round-trips",
    )
    check(m.to_cnf(tokens, ontology) == plain, "to_cnf matches transform_text")

    tagger = m.Tagger.default()
    tagged = tagger.tag("I have never had the flu!")
    tags = [tag for _, tag in tagged]
    check(len(tagged) == 6, f"tagger produced {tagged}")
    check(m.to_cnf_pos(tokens, tags, ontology) == padded, "to_cnf_pos matches transform_text")

    # Metrics and the worked example.
    scores = m.metrics([1, 1, 1, 1, 0, 0, 0, 0, 0, 1], [1, 1, 1, 0, 1, 1, 0, 0, 0, 0])
    check(scores["tp"] == 3 and scores["fp"] == 2, f"confusion counts {scores}")
    worked = m.metrics([1, 1, 1, 1, 0, 0, 0, 0, 0, 0], [1, 1, 1, 0, 1, 1, 0, 0, 0, 0])
    check(
        abs(worked["precision"] - 0.75) < 1e-12
        and abs(worked["recall"] - 0.6) < 1e-12
        and abs(worked["f1"] - 2 / 3) < 1e-12,
        "worked metrics example",
    )

    # Fold sizes for the documented case.
    folds = m.kfold_indices(13004, 10, 42)
    sizes = [len(f) for f in folds]
    check(sizes == [1301] * 4 + [1300] * 6, f"fold sizes {sizes}")
    check(sorted(i for f in folds for i in f) == list(range(13004)), "folds partition the range")

    # Precision-recall curve endpoints.
    curve = m.pr_curve([0.9, 0.8, 0.7, 0.6], [1, 1, 0, 0])
    check(abs(curve["auc"] - 1.0) < 1e-15, f"perfect ranking auc {curve['auc']}")
    constant = m.pr_curve([0.5, 0.5, 0.5, 0.5], [1, 0, 0, 0])
    check(
        len(constant["points"]) == 1 and abs(constant["auc"] - 0.25) < 1e-15,
        "constant scores collapse to prevalence",
    )

    # Aggregation across datasets.
    report = m.generalization_report(
        [("d1", 0.9, 0.8, 0.85), ("d2", 0.7, 0.6, 0.65), ("d3", 0.8, 0.7, 0.75)]
    )
    check(abs(report["mean"]["f1"] - 0.75) < 1e-12, f"mean f1 {report['mean']}")
    check(abs(report["variance"]["f1"] - 0.01) < 1e-12, f"variance f1 {report['variance']}")
    single = m.generalization_report([("only", 0.9, 0.8, 0.85)])
    check(single["variance"] is None, "single dataset has no variance")

    # A small embedding: deterministic and queryable.
    docs = [["A", "B", "C"], ["A", "B", "D"], ["C", "D", "A"], ["B", "A", "C"]] * 10
    emb = m.Embedding.train(docs, dim=8, window=2, negative=2, epochs=3, seed=7)
    check(sorted(emb.vocab) == ["A", "B", "C", "D"], f"embedding vocab {emb.vocab}")
    check(emb.dim == 8, "embedding dimension")
    neighbors = emb.most_similar("A", 2)
    check(len(neighbors) == 2 and neighbors[0][1] >= neighbors[1][1], f"neighbors {neighbors}")
    vec_one = emb.infer(["A", "B"], epochs=3, seed=9)
    vec_two = emb.infer(["A", "B"], epochs=3, seed=9)
    check(vec_one == vec_two, "inference is deterministic")
    emb_again = m.Embedding.train(docs, dim=8, window=2, negative=2, epochs=3, seed=7)
    check(emb.to_json() == emb_again.to_json(), "embedding training is deterministic")
    check(emb.doc_vector(emb.doc_ids[0]) is not None, "stored doc vector accessible")
    check(emb.doc_vector("nope") is None, "unknown doc id gives None")

    # Linear classifier on a separable toy problem.
    rows = [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0], [0.1, 0.9]]
    labels = [1, 1, 0, 0]
    clf = m.LinearClassifier.train(rows, labels, loss="logistic", epochs=200)
    check([clf.predict(r) for r in rows] == labels, "classifier separates the toy set")
    proba = clf.predict_proba([1.0, 0.0])
    check(0.5 < proba <= 1.0, f"probability {proba}")
    clf_back = m.LinearClassifier.from_json(clf.to_json())
    check(
        clf_back.score([1.0, 0.0]) == clf.score([1.0, 0.0]),
        "classifier JSON round-trips bit-exactly",
    )

    # Full pipeline over raw texts.
    positives = [f"i have the flu today {i}" for i in range(10)]
    negatives = [f"the clinic opened a ward {i}" for i in range(10)]
    texts = positives + negatives
    ids = [f"r{i}" for i in range(len(texts))]
    labels = [1] * 10 + [0] * 10
    pipe = m.Pipeline.train(ids, texts, labels, epochs=30, seed=3)
    check(pipe.classifier == "bow-sgd" and pipe.mode == "plain-oov", "pipeline settings")
    preds = pipe.predict(ids, texts)
    check(preds == labels, f"pipeline refits its training data, got {preds}")
    pipe_back = m.Pipeline.from_json(pipe.to_json())
    check(
        pipe_back.score(ids, texts) == pipe.score(ids, texts),
        "pipeline JSON round-trips bit-exactly",
    )

    # Errors surface as exceptions, not crashes.
    try:
        m.transform_text("x", mode="bogus")
        sys.exit("FAIL: bad mode was accepted")
    except ValueError:
        print("ok: bad mode raises ValueError")
    try:
        m.kfold_indices(3, 9, 1)
        sys.exit("FAIL: k > n was accepted")
    except ValueError:
        print("ok: bad fold count raises ValueError")
    check(not math.isnan(curve["auc"]), "no NaNs escaped")

    print("smoke test passed")


if __name__ == "__main__":
    main()
