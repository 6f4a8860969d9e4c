from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nwdaf_testbed.domain import (
    AmfEventKind,
    CellId,
    HandoverPayload,
    LocationReportPayload,
    NetworkEvent,
    Position,
    SimInstant,
)
from nwdaf_testbed.predictor import (
    CSV_HEADER,
    DecisionTreeClassifier,
    Encoder,
    FeatureRow,
    KNearestNeighbors,
    ModelKind,
    SplitSpec,
    build_dataset,
    capabilities,
    evaluate,
    majority_baseline,
    parse_kind,
    predict_next_cell,
    read_dataset_csv,
    split,
    train,
    train_eval,
    write_dataset_csv,
)
from nwdaf_testbed.predictor import models as models_mod

from .oracles import reference_predict, reference_tree

IDS = {c: CellId(c, i) for i, c in enumerate("ABC", 1)}
CELLS = {"A": Position(0, 0), "B": Position(200, 0), "C": Position(100, 150)}
T0 = 7 * 3600.0  # morning


def loc(t, cell, supi="u"):
    return NetworkEvent(AmfEventKind.LOCATION_REPORT, SimInstant(T0 + t), supi, LocationReportPayload(IDS[cell]))


def ho(t, src, dst, supi="u"):
    return NetworkEvent(AmfEventKind.HANDOVER, SimInstant(T0 + t), supi, HandoverPayload(IDS[src], IDS[dst]))


WALK = [
    loc(0, "A"),
    ho(100, "A", "B"), loc(100, "B"),    # only one cell seen before: no row
    ho(200, "B", "C"), loc(200, "C"),    # B after A, B entered 1 of 2 morning entries
    ho(300, "C", "B"), loc(300, "B"),    # C after B, 1 of 3
    ho(400, "B", "A"), loc(400, "A"),    # B after C, 2 of 4
    ho(400, "A", "C"), loc(400, "C"),    # entered A at the same instant: dropped
]


def test_build_dataset_rows():
    rows = build_dataset(WALK, CELLS)
    got = [(r.prev_cell_1, r.prev_cell_2, r.time_category, r.visit_frequency, r.label) for r in rows]
    assert got == [
        ("B", "A", "morning", 0.5, "C"),
        ("C", "B", "morning", pytest.approx(1 / 3), "B"),
        ("B", "C", "morning", 0.5, "A"),
    ]
    assert (rows[1].cell_x, rows[1].cell_y) == (100.0, 150.0)
    assert all(r.feature_time_s < r.label_time_s for r in rows)


def test_visit_frequency_counts_entries_within_category():
    events = [loc(0, "A")]
    t = 0
    for cell_from, cell_to in [("A", "B"), ("B", "A"), ("A", "B"), ("B", "C"), ("C", "A"), ("A", "B"), ("B", "A")]:
        t += 60
        events += [ho(t, cell_from, cell_to), loc(t, cell_to)]
    t += 60
    events.append(ho(t, "A", "C"))
    last = build_dataset(events, CELLS)[-1]
    # eight morning entries: A four times, B three times, C once
    assert last.prev_cell_1 == "A" and last.visit_frequency == 4 / 8


def test_dataset_csv_round_trip(tmp_path):
    rows = build_dataset(WALK, CELLS)
    path = write_dataset_csv(rows, tmp_path / "d.csv")
    assert path.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert read_dataset_csv(path) == rows
    (tmp_path / "bad.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        read_dataset_csv(tmp_path / "bad.csv")


def row(supi="u1", p1="A", p2="B", cat="morning", x=0.0, y=0.0, vf=0.5, label="C"):
    return FeatureRow(supi, p1, p2, cat, x, y, vf, label)


def test_encoder_layout_and_scaling():
    train_rows = [row(p1="B", x=0.0, vf=0.2), row(p1="A", x=200.0, vf=0.6)]
    enc = Encoder.fit(train_rows)
    assert enc.columns == ["supi=u1", "prev_cell_1=A", "prev_cell_1=B", "prev_cell_2=B", "time_category=morning",
                           "cell_x", "cell_y", "visit_frequency"]
    X = enc.transform(train_rows + [row(p1="Z", x=100.0, vf=0.4)])
    assert X[0].tolist() == [1, 0, 1, 1, 1, 0, 0, 0]
    assert X[1].tolist() == [1, 1, 0, 1, 1, 1, 0, 1]
    # unseen category becomes an all-zero block; constant column maps to 0
    assert X[2, 1:3].tolist() == [0, 0] and X[2, 5] == 0.5 and X[2, 6] == 0 and X[2, 7] == pytest.approx(0.5)
    assert "supi=u1" not in Encoder.fit(train_rows, include_supi=False).columns


@pytest.mark.parametrize("n,n_train", [(10, 7), (15, 11), (11, 8), (100, 70)])
def test_split_sizes(n, n_train):
    rows = [row(vf=i / n) for i in range(n)]
    a, b = split(rows, SplitSpec(seed=3))
    assert len(a) == n_train and len(a) + len(b) == n
    assert split(rows, SplitSpec(seed=3)) == (a, b)


def test_split_chronological_and_limits():
    rows = [FeatureRow("u", "A", "B", "night", 0, 0, i / 20, "C", label_time_s=100 - i) for i in range(20)]
    a, b = split(rows, SplitSpec(strategy="chronological"))
    assert max(r.label_time_s for r in a) < min(r.label_time_s for r in b)
    with pytest.raises(ValueError):
        split(rows[:9])
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)


def test_tree_tie_breaks():
    tree = DecisionTreeClassifier().fit(np.array([[0.0, 0.0], [1.0, 1.0]]), ["a", "b"])
    assert (tree.root.feature, tree.root.threshold) == (0, 0.5)
    stump = DecisionTreeClassifier(max_depth=0).fit(np.array([[0.0], [1.0]]), ["b", "a"])
    labels, conf = stump.predict_with_confidence(np.array([[5.0]]))
    assert labels[0] == "a" and conf[0] == 0.5


def test_tree_fits_training_data_when_separable():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(150, 3))
    y = np.where(X[:, 0] + X[:, 1] > 0, "p", "q")
    tree = DecisionTreeClassifier().fit(X, y)
    assert list(tree.predict(X)) == list(y)
    assert DecisionTreeClassifier(max_depth=1).fit(X, y).n_leaves == 2


def test_tree_identical_points_cannot_split():
    tree = DecisionTreeClassifier().fit(np.zeros((4, 2)), ["b", "a", "b", "a"])
    assert tree.n_leaves == 1 and tree.predict(np.zeros((1, 2)))[0] == "a"


grid = st.sampled_from([0.0, 0.1, 0.2, 0.3, 1.0, -1.0])


@settings(max_examples=150, deadline=None)
@given(st.integers(1, 3).flatmap(lambda d: st.lists(
    st.tuples(st.lists(grid, min_size=d, max_size=d), st.sampled_from("xyz")), min_size=1, max_size=60)),
    st.one_of(st.none(), st.integers(0, 4)))
def test_tree_matches_reference(data, depth):
    X = [list(x) for x, _ in data]
    y = [lab for _, lab in data]
    tree = DecisionTreeClassifier(max_depth=depth).fit(np.array(X), y)
    ref = reference_tree(X, y, max_depth=depth)
    assert list(tree.predict(np.array(X))) == [reference_predict(ref, x) for x in X]


def test_knn_vote_and_ties():
    X = np.array([[0.0], [1.0], [10.0], [11.0]])
    knn = KNearestNeighbors(k=3).fit(X, ["a", "a", "b", "b"])
    labels, conf = knn.predict_with_confidence(np.array([[0.4], [10.6]]))
    assert labels.tolist() == ["a", "b"] and conf.tolist() == [2 / 3, 2 / 3]
    tie = KNearestNeighbors(k=2).fit(np.array([[-1.0], [1.0]]), ["z", "m"])
    assert tie.predict(np.array([[0.0]]))[0] == "m"
    assert KNearestNeighbors(k=50).fit(X, ["a", "a", "b", "b"]).predict(X[:1])[0] == "a"
    with pytest.raises(ValueError):
        KNearestNeighbors(k=0)


def test_knn_chunking_does_not_change_results():
    rng = np.random.default_rng(1)
    X, Q = rng.normal(size=(80, 4)), rng.normal(size=(40, 4))
    y = rng.choice(["a", "b", "c"], size=80).tolist()
    one = KNearestNeighbors(k=5, chunk=7).fit(X, y).predict(Q)
    two = KNearestNeighbors(k=5, chunk=1000).fit(X, y).predict(Q)
    assert one.tolist() == two.tolist()


def test_parse_kind():
    assert parse_kind("dt") is ModelKind.DECISION_TREE
    assert parse_kind("KNN") is ModelKind.KNN
    assert parse_kind("random_forest") is ModelKind.RANDOM_FOREST
    with pytest.raises(ValueError):
        parse_kind("svm")


def cyclic_rows(n=60):
    nxt = {"A": "B", "B": "C", "C": "A"}
    prev = {v: k for k, v in nxt.items()}
    cells = "ABC"
    out = []
    for i in range(n):
        cur = cells[i % 3]
        out.append(FeatureRow("u", cur, prev[cur], "morning", CELLS[cur].x, CELLS[cur].y, 1 / 3, nxt[cur],
                              label_time_s=float(i)))
    return out


def test_train_eval_on_deterministic_cycle():
    result = train_eval(cyclic_rows(), ["dt", "knn"], SplitSpec(seed=1))
    assert result.accuracy("dt") == 1.0 and result.accuracy("knn") == 1.0
    ev = result.evaluations[0]
    assert sum(map(sum, ev.confusion)) == result.n_test
    assert set(result.to_json()) >= {"models", "baseline", "reference_accuracy", "split"}
    assert "DECISION_TREE" in result.table()


def test_evaluation_confusion_matches_accuracy():
    rows = cyclic_rows(30)
    rows = [r if i % 4 else FeatureRow(*r.csv_values()[:-1], "A") for i, r in enumerate(rows)]
    model = train("knn", rows[:20], {"k": 1})
    ev = evaluate(model, rows[20:])
    diag = sum(ev.confusion[i][i] for i in range(len(ev.labels)))
    assert ev.accuracy == diag / 10


def test_predict_next_cell():
    model = train("dt", cyclic_rows())
    label, conf = predict_next_cell(model, row(p1="B", p2="A", x=200.0, y=0.0, vf=1 / 3))
    assert label == "C" and 0 < conf <= 1
    with pytest.raises(ValueError):
        predict_next_cell(model, row(x="far"))


def test_majority_baseline_ties_to_smallest_label():
    train_rows = [row(label="B"), row(label="A")]
    assert majority_baseline(train_rows, [row(label="A"), row(label="C")]) == ("A", 0.5)


def test_ensembles_when_available():
    assert {ModelKind.DECISION_TREE, ModelKind.KNN} <= capabilities()
    if ModelKind.GRADIENT_BOOSTING not in capabilities():
        pytest.skip("scikit-learn not installed")
    result = train_eval(cyclic_rows(), ["gb", "rf"], SplitSpec(seed=0), {ModelKind.GRADIENT_BOOSTING: {
        "n_estimators": 10}})
    assert result.accuracy("gb") == 1.0 and result.accuracy("rf") == 1.0


def test_missing_ensemble_backend_is_reported(monkeypatch):
    monkeypatch.setattr(models_mod, "capabilities", lambda: {ModelKind.DECISION_TREE, ModelKind.KNN})
    result = train_eval(cyclic_rows(), ["dt", "gb"])
    assert result.unsupported == ["GRADIENT_BOOSTING"] and len(result.evaluations) == 1
