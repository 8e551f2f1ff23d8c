import numpy as np
import pytest

from spacetime_gc.engine import ModelParams
from spacetime_gc.kriging import (
    SingularSystemError,
    build,
    kriging_weights,
    predict,
    predict_with_error,
    read_sites_csv,
    read_targets_csv,
    write_predictions_csv,
)

ROWS = {
    0: ModelParams(1.5, 1.2),
    1: ModelParams(1.5, 2.0),
    2: ModelParams.from_theta_prime(1.5, 1.5),
}


def grid25(offset=(0.0, 0.0)):
    g = np.linspace(0.0, 4.0, 5)
    X, Y = np.meshgrid(g, g)
    return np.column_stack([X.ravel(), Y.ravel()]) + np.asarray(offset)


def field(z):
    return np.sin(z[:, 0]) + np.cos(0.7 * z[:, 1]) + 0.1 * z[:, 0] * z[:, 1]


def poly(z, k):
    x, y = z[:, 0], z[:, 1]
    out = 1.5 + 0 * x
    if k >= 1:
        out = out + 2 * x - y
    if k >= 2:
        out = out + 0.3 * x * y - 0.2 * y * y
    return out


@pytest.mark.parametrize("k", [0, 1, 2])
def test_row_orders(k):
    assert ROWS[k].k0 == k


def test_single_site():
    s = build([[0.5, 0.5]], [4.2], ModelParams(1.5, 1.2))
    for t in ([0.5, 0.5], [3.0, -2.0], [100.0, 7.0]):
        assert predict(s, t) == pytest.approx(4.2, rel=1e-14)


def test_duplicate_sites_are_singular():
    z = np.vstack([grid25(), grid25()[:1]])
    with pytest.raises(SingularSystemError, match="condition") as exc:
        build(z, np.ones(len(z)), ROWS[1])
    assert exc.value.condition > 1e12


def test_too_few_sites():
    with pytest.raises(ValueError, match="at least 6 sites"):
        build(grid25()[:5], np.ones(5), ROWS[2])


def test_condition_recorded():
    s = build(grid25(), field(grid25()), ModelParams(1.5, 2.0))
    assert np.isfinite(s.condition)
    assert 1.0 < s.condition < 1e8
    assert s.gram.shape == (25, 25)
    assert s.drift_matrix.shape == (25, 3)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_exact_at_sites(k):
    z = grid25()
    v = field(z)
    s = build(z, v, ROWS[k])
    mean, _ = predict_with_error(s, z)
    assert np.max(np.abs(mean - v) / np.abs(v)) <= 1e-10


@pytest.mark.parametrize("k", [0, 1, 2])
def test_constants_reproduced(k):
    z = grid25()
    s = build(z, np.full(25, 3.25), ROWS[k])
    targets = np.random.default_rng(1).random((8, 2)) * 6 - 1
    mean, _ = predict_with_error(s, targets)
    assert np.allclose(mean, 3.25, rtol=1e-9, atol=0)


@pytest.mark.parametrize("k", [0, 1, 2])
def test_drift_reproduced(k):
    z = grid25()
    s = build(z, poly(z, k), ROWS[k])
    targets = np.random.default_rng(2).random((8, 2)) * 6 - 1
    mean, _ = predict_with_error(s, targets)
    expected = poly(targets, k)
    assert np.max(np.abs(mean - expected) / np.abs(expected)) <= 1e-9


@pytest.mark.parametrize("k", [0, 1, 2])
def test_translation_invariance_exact(k):
    # dyadic coordinates and shift: shifted separations are bit-identical
    z = grid25()
    targets = np.array([[0.5, 0.25], [3.75, 1.125], [-1.0, 4.5]])
    shift = np.array([16.0, -8.0])
    a = build(z, field(z), ROWS[k])
    b = build(z + shift, field(z), ROWS[k])
    ma, _ = predict_with_error(a, targets)
    mb, _ = predict_with_error(b, targets + shift)
    assert np.max(np.abs(ma - mb) / np.abs(ma)) <= 1e-10


@pytest.mark.parametrize("k", [0, 1, 2])
def test_translation_invariance_within_error(k):
    z = grid25()
    targets = np.random.default_rng(3).random((6, 2)) * 5
    shift = np.array([10.3, -3.7])
    a = build(z, field(z), ROWS[k])
    b = build(z + shift, field(z), ROWS[k])
    ma, ea = predict_with_error(a, targets)
    mb, eb = predict_with_error(b, targets + shift)
    assert np.all(np.abs(ma - mb) <= ea + eb + 1e-10 * np.abs(ma))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_weights_mirror_symmetric(k):
    # target on the grid's x = 2 symmetry line: weights mirror in x
    z = grid25()
    s = build(z, field(z), ROWS[k])
    lam, _ = kriging_weights(s, [2.0, 5.5])
    assert np.sum(lam) == pytest.approx(1.0, rel=1e-10)
    mirror = lam.reshape(5, 5)[:, ::-1].ravel()
    assert np.max(np.abs(lam - mirror)) < 1e-9


def test_weights_at_site_are_unit_vector():
    z = grid25()
    s = build(z, field(z), ROWS[1])
    lam, _ = kriging_weights(s, z[7])
    e = np.zeros(25)
    e[7] = 1
    assert np.max(np.abs(lam - e)) < 1e-10


def test_csv_round_trip(tmp_path):
    z = grid25()
    data = tmp_path / "data.csv"
    with open(data, "w", encoding="utf-8") as fh:
        fh.write("x1,y1,value\n")
        for (x, y), v in zip(z, field(z)):
            fh.write(f"{float(x)!r},{float(y)!r},{float(v)!r}\n")
    sites, values, d1, d2 = read_sites_csv(data)
    assert (d1, d2) == (1, 1)
    assert np.array_equal(sites, z)
    assert np.array_equal(values, field(z))

    targets_path = tmp_path / "targets.csv"
    targets_path.write_text("x1,y1\n0.5,0.5\n1.5,2.5\n", encoding="utf-8")
    targets, t1, t2 = read_targets_csv(targets_path)
    assert targets.shape == (2, 2)

    s = build(sites, values, ROWS[1])
    mean, err = predict_with_error(s, targets)
    out = tmp_path / "out.csv"
    write_predictions_csv(out, targets, mean, err, 1, 1)
    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "x1,y1,value,err_est"
    assert float(lines[1].split(",")[2]) == mean[0]


def test_csv_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,value\n1,2,3\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        read_sites_csv(p)
