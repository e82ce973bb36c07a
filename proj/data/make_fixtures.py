#!/usr/bin/env python3
"""Regenerate the bundled model and dataset fixtures under data/fixtures/.

Needs scikit-learn and numpy. The C++ toolkit never runs this script; it only
reads the JSON/CSV files it produces.

Datasets:
  balance_scale  regenerated from its defining rule (all 5^4 attribute tuples)
  redwine        data/raw/winequality-red.csv.gz
  iris           sklearn.datasets.load_iris
  seeds          data/raw/seeds_dataset.txt when present (tab separated)
"""

import argparse
import gzip
import itertools
import json
import pathlib

import numpy as np
from sklearn.datasets import load_iris
from sklearn.model_selection import RandomizedSearchCV, train_test_split
from sklearn.neural_network import MLPClassifier, MLPRegressor
from sklearn.svm import SVC, LinearSVR

HERE = pathlib.Path(__file__).resolve().parent
RAW = HERE / "raw"

# hidden-layer widths per dataset, as used for the reference bespoke designs
TOPOLOGY = {
    "balance_scale": {"mlp_c": 3, "mlp_r": 3},
    "redwine": {"mlp_c": 2, "mlp_r": 2},
    "iris": {"mlp_c": 2, "mlp_r": 2},
    "seeds": {"mlp_c": 3, "mlp_r": 3},
}


def balance_scale():
    rows, labels = [], []
    for lw, ld, rw, rd in itertools.product(range(1, 6), repeat=4):
        left, right = lw * ld, rw * rd
        rows.append([lw, ld, rw, rd])
        # classes in UCI order: B=0, L=1, R=2
        labels.append(0 if left == right else (1 if left > right else 2))
    return np.array(rows, float), np.array(labels, int)


def redwine():
    with gzip.open(RAW / "winequality-red.csv.gz", "rt") as fh:
        data = np.genfromtxt(fh, delimiter=",", skip_header=1)
    return data[:, :-1], data[:, -1].astype(int)


def iris():
    ds = load_iris()
    return ds.data.astype(float), ds.target.astype(int)


def seeds():
    path = RAW / "seeds_dataset.txt"
    if not path.exists():
        return None
    data = np.loadtxt(path)
    return data[:, :-1], data[:, -1].astype(int)


def normalize(x):
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return (x - lo) / span


def write_csv(path, x, y):
    with open(path, "w") as fh:
        fh.write(",".join([f"f{i}" for i in range(x.shape[1])] + ["label"]) + "\n")
        for row, label in zip(x, y):
            fh.write(",".join(f"{v:.17g}" for v in row) + f",{int(label)}\n")


def model_doc(kind, topology, weights, biases, n_features, labels):
    return {
        "kind": kind,
        "topology": [int(t) for t in topology],
        "weights": [np.asarray(w, float).tolist() for w in weights],
        "biases": [np.asarray(b, float).tolist() for b in biases],
        "n_features": int(n_features),
        "n_classes": int(len(labels)),
        "class_labels": [int(c) for c in labels],
    }


def export_svc(svc, n_features):
    """Emit one classifier per class pair (i, j), i < j, positive -> class i."""
    classes = list(svc.classes_)
    k = len(classes)
    coef, icpt = svc.coef_, svc.intercept_
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    assert len(pairs) == coef.shape[0]
    # libsvm-backed SVC votes for class i when the pair decision is positive
    return model_doc("SVM-C", [len(pairs)], [coef], [icpt], n_features, classes), pairs


def ovo_predict(doc, pairs, x):
    w = np.asarray(doc["weights"][0])
    b = np.asarray(doc["biases"][0])
    votes = np.zeros((x.shape[0], doc["n_classes"]), int)
    dec = x @ w.T + b
    for c, (i, j) in enumerate(pairs):
        votes[:, i] += dec[:, c] > 0
        votes[:, j] += dec[:, c] <= 0
    return np.array(doc["class_labels"])[votes.argmax(axis=1)]


def train_all(name, x, y, seed, outdir):
    x = normalize(x)
    x_tr, x_te, y_tr, y_te = train_test_split(x, y, test_size=0.3, random_state=seed, stratify=y)
    ds_dir = outdir / name
    ds_dir.mkdir(parents=True, exist_ok=True)
    write_csv(ds_dir / "train.csv", x_tr, y_tr)
    write_csv(ds_dir / "test.csv", x_te, y_te)
    labels = sorted(set(int(v) for v in y))
    nf = x.shape[1]
    rng = np.random.RandomState(seed)
    hid = TOPOLOGY[name]
    report = {}

    search = RandomizedSearchCV(
        MLPClassifier(hidden_layer_sizes=(hid["mlp_c"],), max_iter=3000, random_state=seed),
        {"alpha": np.logspace(-5, -1, 20), "learning_rate_init": np.logspace(-3, -1, 10)},
        n_iter=12, cv=5, random_state=rng)
    mlp_c = search.fit(x_tr, y_tr).best_estimator_
    report["mlp_c"] = mlp_c.score(x_te, y_te)
    doc = model_doc("MLP-C", [nf, hid["mlp_c"], len(labels)],
                    [c.T for c in mlp_c.coefs_], mlp_c.intercepts_, nf, labels)
    (ds_dir / "mlp_c.json").write_text(json.dumps(doc, indent=1))

    search = RandomizedSearchCV(
        MLPRegressor(hidden_layer_sizes=(hid["mlp_r"],), max_iter=3000, random_state=seed),
        {"alpha": np.logspace(-5, -1, 20), "learning_rate_init": np.logspace(-3, -1, 10)},
        n_iter=12, cv=5, random_state=rng)
    mlp_r = search.fit(x_tr, y_tr).best_estimator_
    pred = np.clip(np.rint(mlp_r.predict(x_te)), labels[0], labels[-1])
    report["mlp_r"] = float(np.mean(pred == y_te))
    doc = model_doc("MLP-R", [nf, hid["mlp_r"], 1],
                    [c.T for c in mlp_r.coefs_], mlp_r.intercepts_, nf, labels)
    (ds_dir / "mlp_r.json").write_text(json.dumps(doc, indent=1))

    search = RandomizedSearchCV(
        SVC(kernel="linear", decision_function_shape="ovo"),
        {"C": np.logspace(-2, 3, 30)}, n_iter=12, cv=5, random_state=rng)
    svc = search.fit(x_tr, y_tr).best_estimator_
    doc, pairs = export_svc(svc, nf)
    agree = float(np.mean(ovo_predict(doc, pairs, x_te) == svc.predict(x_te)))
    assert agree > 0.99, f"{name}: exported OvO disagrees with SVC ({agree})"
    report["svm_c"] = svc.score(x_te, y_te)
    (ds_dir / "svm_c.json").write_text(json.dumps(doc, indent=1))

    search = RandomizedSearchCV(
        LinearSVR(max_iter=50000, random_state=seed),
        {"C": np.logspace(-2, 3, 30), "epsilon": np.linspace(0.0, 0.5, 11)},
        n_iter=12, cv=5, random_state=rng)
    svr = search.fit(x_tr, y_tr).best_estimator_
    pred = np.clip(np.rint(svr.predict(x_te)), labels[0], labels[-1])
    report["svm_r"] = float(np.mean(pred == y_te))
    doc = model_doc("SVM-R", [1], [svr.coef_.reshape(1, -1)], [np.atleast_1d(svr.intercept_)], nf, labels)
    (ds_dir / "svm_r.json").write_text(json.dumps(doc, indent=1))
    return report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(HERE / "fixtures"))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    sources = {"balance_scale": balance_scale, "redwine": redwine, "iris": iris, "seeds": seeds}
    for name, loader in sources.items():
        data = loader()
        if data is None:
            print(f"{name}: raw data not found, skipped")
            continue
        report = train_all(name, *data, args.seed, out)
        print(name, {k: round(v, 3) for k, v in report.items()})


if __name__ == "__main__":
    main()
