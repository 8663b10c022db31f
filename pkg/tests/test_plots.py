import numpy as np

from relfeat import plots


def test_loss_curves(tmp_path):
    history = [(1.9, 1.95), (1.2, 1.3), (0.8, None)]
    out = plots.loss_curves(history, tmp_path / "loss.png")
    assert out.endswith("loss.png")
    assert (tmp_path / "loss.png").stat().st_size > 0


def test_spectrum_plot(tmp_path):
    sv = np.array([1.0, 0.7, 0.5])
    out = plots.spectrum_plot(sv, tmp_path / "spec.png", exact=[1.0, 0.71, 0.5])
    assert (tmp_path / "spec.png").stat().st_size > 0
    assert out == str(tmp_path / "spec.png")


def test_dataset_scatter(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 2))
    plots.dataset_scatter(x, tmp_path / "xy.png", color=x[:, 0])
    assert (tmp_path / "xy.png").stat().st_size > 0
    # 1-D data is plotted against sample index
    plots.dataset_scatter(x[:, :1], tmp_path / "x1.png")
    assert (tmp_path / "x1.png").stat().st_size > 0


def test_classification_plot(tmp_path):
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 2))
    labels = rng.integers(0, 3, 40)
    predicted = labels.copy()
    predicted[:5] = (predicted[:5] + 1) % 3
    plots.classification_plot(x, labels, predicted, tmp_path / "cls.png")
    assert (tmp_path / "cls.png").stat().st_size > 0
