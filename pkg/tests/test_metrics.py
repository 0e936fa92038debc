import numpy as np
import pytest
from scipy import integrate

from src.saliency.metrics import REPORT_COLUMNS, saliency_metrics
from src.utils.errors import DegenerateInputError, ShapeError
from src.utils.models import LossWeights, SaliencyMap, Split


def brute_auc(s, points):
    """AUC by explicit ROC points at every fixated-value threshold"""
    fixated = np.zeros(s.shape, dtype=bool)
    for x, y in points:
        fixated[y, x] = True
    fix_values = np.array([s[y, x] for x, y in points])
    others = s[~fixated]
    tps, fps = [0.0], [0.0]
    for thr in sorted(set(fix_values.tolist()), reverse=True):
        tps.append(np.mean(fix_values >= thr))
        fps.append(np.mean(others >= thr))
    tps.append(1.0)
    fps.append(1.0)
    return float(integrate.trapezoid(tps, fps))


def test_identical_maps():
    rng = np.random.default_rng(0)
    m = rng.random((30, 40))
    assert saliency_metrics.sim(m, m) == pytest.approx(1.0)
    assert saliency_metrics.cc(m, m) == pytest.approx(1.0)
    assert saliency_metrics.kl(m, m) < 1e-9
    assert saliency_metrics.composite_loss(m, m) == pytest.approx(-5.0, abs=1e-9)
    assert saliency_metrics.regression_metrics(m.ravel(), m.ravel()) == (0.0, 0.0)


def test_metrics_accept_saliency_maps():
    m = SaliencyMap(values=np.arange(12.0).reshape(3, 4))
    assert saliency_metrics.cc(m, m.values) == pytest.approx(1.0)


def test_auc_matches_explicit_roc():
    rng = np.random.default_rng(1)
    for _ in range(20):
        s = np.round(rng.random((15, 20)), 2)
        points = list({(int(rng.integers(20)), int(rng.integers(15))) for _ in range(12)})
        assert saliency_metrics.auc(s, points) == pytest.approx(brute_auc(s, points), abs=1e-12)


def test_auc_extremes():
    s = np.zeros((10, 10))
    s[2, 3] = 1.0
    assert saliency_metrics.auc(s, [(3, 2)]) == pytest.approx(1.0)
    # a fixation on the global minimum only reaches the chance diagonal
    inverted = 1.0 - s
    assert saliency_metrics.auc(inverted, [(3, 2)]) == pytest.approx(0.5)


@pytest.mark.slow
def test_constant_map_auc_is_chance():
    rng = np.random.default_rng(2)
    s = np.full((24, 32), 0.3)
    values = []
    for _ in range(1000):
        points = [(int(x), int(y)) for x, y in zip(rng.integers(0, 32, 5), rng.integers(0, 24, 5))]
        values.append(saliency_metrics.auc(s, points))
    assert np.mean(values) == pytest.approx(0.5, abs=0.02)


def test_nss():
    s = np.zeros((4, 4))
    s[0, 0] = 1.0
    z = (1.0 - s.mean()) / s.std()
    assert saliency_metrics.nss(s, [(0, 0)]) == pytest.approx(z)
    with pytest.raises(DegenerateInputError):
        saliency_metrics.nss(np.ones((4, 4)), [(0, 0)])


def test_degenerate_inputs():
    zero = np.zeros((5, 5))
    other = np.eye(5)
    with pytest.raises(DegenerateInputError):
        saliency_metrics.sim(zero, zero)
    assert saliency_metrics.sim(zero, other) == 0.0
    with pytest.raises(DegenerateInputError):
        saliency_metrics.cc(np.ones((5, 5)), other)
    with pytest.raises(DegenerateInputError):
        saliency_metrics.auc(other, [])
    with pytest.raises(ShapeError):
        saliency_metrics.auc(other, [(9, 9)])
    with pytest.raises(ShapeError):
        saliency_metrics.cc(other, np.eye(4))
    with pytest.raises(ShapeError):
        saliency_metrics.regression_metrics([1.0, 2.0], [1.0])
    with pytest.raises(DegenerateInputError):
        saliency_metrics.regression_metrics([], [])


def test_kl_is_asymmetric_and_non_negative():
    a = np.array([[1.0, 0.0], [0.0, 0.0]])
    b = np.ones((2, 2))
    assert saliency_metrics.kl(a, b) == pytest.approx(np.log(4.0), rel=1e-5)
    assert saliency_metrics.kl(b, a) > saliency_metrics.kl(a, b)


def test_composite_loss_with_nss_weight():
    m = np.random.default_rng(3).random((8, 8))
    w = LossWeights(w_nss=-1.0)
    with pytest.raises(DegenerateInputError):
        saliency_metrics.composite_loss(m, m, w=w)
    loss = saliency_metrics.composite_loss(m, m, fixations=[(1, 1)], w=w)
    assert loss == pytest.approx(-5.0 - saliency_metrics.nss(m, [(1, 1)]))


def test_regression_metrics():
    mse, mae = saliency_metrics.regression_metrics([0.0, 1.0, 2.0], [1.0, 1.0, 0.0])
    assert mse == pytest.approx(5 / 3)
    assert mae == pytest.approx(1.0)


def test_evaluate_maps_skips_degenerate_pairs():
    rng = np.random.default_rng(4)
    gt = rng.random((10, 10))
    pairs = [
        (gt, gt, [(1, 1), (2, 2)]),
        (np.ones((10, 10)), gt, [(1, 1)]),
    ]
    report = saliency_metrics.evaluate_maps(pairs, Split.HIGHLIGHT)
    assert report.n == 1
    assert report.cc == pytest.approx(1.0)
    with pytest.raises(DegenerateInputError):
        saliency_metrics.evaluate_maps(pairs[1:], Split.ALL)

    frame = saliency_metrics.report_frame([report])
    assert list(frame.columns) == REPORT_COLUMNS
    assert frame.loc[0, "split"] == "highlight"


def test_regression_report_frame():
    r = saliency_metrics.regression_report("itti", Split.NO_HIGHLIGHT, [0.1, 0.2], [0.1, 0.4])
    assert r.n == 2
    frame = saliency_metrics.regression_frame([r])
    assert list(frame.columns) == ["model", "split", "mse", "mae", "n"]
    assert frame.loc[0, "mae"] == pytest.approx(0.1)


def test_sim_and_cc_are_symmetric():
    rng = np.random.default_rng(5)
    p, q = rng.random((12, 12)), rng.random((12, 12))
    assert saliency_metrics.sim(p, q) == pytest.approx(saliency_metrics.sim(q, p))
    assert saliency_metrics.cc(p, q) == pytest.approx(saliency_metrics.cc(q, p))


def test_kl_of_certain_against_even():
    assert saliency_metrics.kl(np.array([[1.0, 0.0]]), np.array([[0.5, 0.5]])) == pytest.approx(np.log(2.0), abs=1e-5)


@pytest.mark.slow
def test_random_maps_are_uninformative():
    rng = np.random.default_rng(21)
    p, q = rng.random((100, 100)), rng.random((100, 100))
    assert abs(saliency_metrics.cc(p, q)) < 0.05
    points = np.column_stack([rng.integers(0, 100, 400), rng.integers(0, 100, 400)])
    assert saliency_metrics.auc(p, points) == pytest.approx(0.5, abs=0.05)
