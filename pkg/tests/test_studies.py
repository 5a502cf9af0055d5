import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from imspe_lab import studies
from imspe_lab.errors import IllConditionedError, UnsupportedDesignError
from imspe_lab.highprec import PrecisionContext
from imspe_lab.imspe import imspe
from imspe_lab.kernel import CovarianceParams, Design
from imspe_lab.search import BaselineRecord, BaselineReport, SearchConfig, random_baseline
from imspe_lab.studies import (PhaseLabel, PhaseRecord, classify, hue_grid, labels_monotone,
                               loglog_slope, phase_boundaries, phase_sweep, quadratic_coefficient,
                               rectangle_widths, richardson_limit, tornado_data, twin_profile)

CTX = PrecisionContext(60)


def D(rows):
    return Design(np.array(rows, dtype=float))


# -- classification ------------------------------------------------------------


def test_classify_examples():
    twins = D([[0, 1e-7], [0, -1e-7], [-0.767117, 0], [0.767117, 0]])
    assert classify(twins) is PhaseLabel.RHOMBOID_WITH_TWINS
    assert classify(D([[0.5, 0.5], [-0.5, 0.5], [0.5, -0.5], [-0.5, -0.5]])) is PhaseLabel.SQUARE
    assert classify(D([[0.6, 0], [-0.6, 0], [0.2, 0], [-0.2, 0]])) is PhaseLabel.FOUR_IN_LINE
    assert classify(D([[0.6, 0.3], [-0.6, 0.3], [0.6, -0.3], [-0.6, -0.3]])) is PhaseLabel.RECTANGLE
    assert classify(D([[0.8, 0], [-0.8, 0], [0, 0.6], [0, -0.6]])) is PhaseLabel.RHOMBOID


def test_classify_twin_parameterised(twin_opt_design):
    assert classify(twin_opt_design) is PhaseLabel.RHOMBOID_WITH_TWINS


def test_classify_other_shapes():
    # equal diagonals: a rotated square, not one of the named phases
    assert classify(D([[0.5, 0], [-0.5, 0], [0, 0.5], [0, -0.5]])) is PhaseLabel.UNCLASSIFIED
    # centred parallelogram
    assert classify(D([[0.94, 0.35], [-0.94, -0.35], [0.24, -0.6], [-0.24, 0.6]])) is PhaseLabel.UNCLASSIFIED
    # twins off centre
    assert classify(D([[0.3, 1e-7], [0.3, -1e-7], [-0.7, 0], [0.7, 0]])) is PhaseLabel.UNCLASSIFIED


def test_classify_unsupported():
    with pytest.raises(UnsupportedDesignError):
        classify(D([[0, 0], [0.5, 0.5], [-0.5, 0.5]]))
    with pytest.raises(UnsupportedDesignError):
        classify(Design(np.zeros((4, 3)) + np.arange(4)[:, None] / 4))


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.sampled_from([(1, 1), (-1, 1), (1, -1)]))
def test_classify_exclusive_and_mirror(a, b, flip):
    shapes = [
        [[a, b], [-a, b], [a, -b], [-a, -b]],
        [[a, 0], [-a, 0], [0, b], [0, -b]],
        [[a, 0], [-a, 0], [0, 1e-6], [0, -1e-6]],
        [[a, 0], [-a, 0], [b, 0], [-b, 0]],
    ]
    for rows in shapes:
        P = np.array(rows) * flip
        label = classify(Design(P))
        assert classify(Design(P[:, ::-1])) is label
        assert classify(Design(P[::-1])) is label


# -- sweep bookkeeping ---------------------------------------------------------


def _rec(t1, t2, label):
    return PhaseRecord((t1, t2), None, None, label)


def test_boundaries_and_monotone():
    L = PhaseLabel
    line = [_rec(1.0, 0.1, L.FOUR_IN_LINE), _rec(1.0, 0.2, L.RHOMBOID_WITH_TWINS),
            _rec(1.0, 0.4, L.RHOMBOID), _rec(1.0, 0.6, L.RECTANGLE), _rec(1.0, 1.0, L.SQUARE),
            _rec(1.0, 2.0, L.RECTANGLE), _rec(1.0, 4.0, L.RHOMBOID)]
    assert labels_monotone(line)
    b = phase_boundaries(line)
    assert b[0] == (1.0, pytest.approx(0.15), L.FOUR_IN_LINE, L.RHOMBOID_WITH_TWINS)
    assert len(b) == 6
    bad = line[:2] + [_rec(1.0, 0.3, L.FOUR_IN_LINE)] + line[2:]
    assert not labels_monotone(bad)
    assert not labels_monotone(line[:3] + [_rec(1.0, 0.5, L.UNCLASSIFIED)] + line[3:])


def test_rectangle_widths():
    recs = [PhaseRecord((1.0, t2), None, 1e-3, PhaseLabel.RECTANGLE) for t2 in (0.1, 1.0)]
    recs.append(PhaseRecord((2.0, 0.5), None, 1e-3, PhaseLabel.RHOMBOID))
    assert rectangle_widths(recs) == [(1.0, pytest.approx(-3.0), pytest.approx(1.0)), (2.0, None, 0.0)]


def test_sweep_records_failures(monkeypatch):
    def boom(*a, **k):
        raise IllConditionedError("ceiling", 960, 4)

    monkeypatch.setattr(studies, "multistart", boom)
    recs = phase_sweep([(0.1, 0.2), (0.3, 0.4)], n_starts=1, jobs=1)
    assert [r.label for r in recs] == [PhaseLabel.UNCLASSIFIED] * 2
    assert all(r.status.startswith("error") for r in recs)
    with pytest.raises(ValueError):
        phase_sweep([], n_starts=1)


def test_sweep_diagonal_square_and_swap():
    cfg = SearchConfig(rng_seed=1)
    recs = phase_sweep([(0.5, 0.5), (0.5, 2.0), (2.0, 0.5)], cfg=cfg, n_starts=2, jobs=1)
    assert recs[0].label is PhaseLabel.SQUARE
    a, b = recs[1], recs[2]
    assert a.label is b.label
    assert abs(float(a.imspe) - float(b.imspe)) < 1e-12 * float(a.imspe)
    assert np.allclose(np.sort(a.design.points[:, ::-1], axis=0), np.sort(b.design.points, axis=0), atol=1e-6)


def test_parallelogram_between_rhomboid_and_rectangle():
    # at theta = (0.128, 0.07) the optimum is a centred parallelogram that beats
    # the best centred rhomboid and the best rectangle; none of the named phases
    p = CovarianceParams((0.128, 0.07))
    para = D([[0.8269, 0.5804], [-0.8269, -0.5804], [0.3937, -0.5518], [-0.3937, 0.5518]])
    rhomb = D([[1.0, 0], [-1.0, 0], [0, 0.6295], [0, -0.6295]])
    rect = D([[0.5732, 0.5748], [-0.5732, 0.5748], [0.5732, -0.5748], [-0.5732, -0.5748]])
    vp, vh, vr = (float(imspe(d, p, CTX).imspe) for d in (para, rhomb, rect))
    assert vp < vr < vh
    assert classify(para) is PhaseLabel.UNCLASSIFIED


# -- twin profiles --------------------------------------------------------------

DELTAS = np.logspace(-4, -2, 9)


def test_profile_axis2_parabolic_minimum(twin_opt_design, twin_opt_params):
    prof = twin_profile(twin_opt_design, twin_opt_params, 2, DELTAS, CTX)
    assert [p.delta for p in prof] == list(DELTAS) and all(p.axis == 2 for p in prof)
    vals = [p.imspe for p in prof]
    lim = richardson_limit(DELTAS[:3], vals[:3])
    assert abs(loglog_slope(DELTAS, vals, lim) - 2.0) < 0.05
    assert quadratic_coefficient(DELTAS, vals) > 0
    lim2 = richardson_limit(DELTAS[1:4], vals[1:4])
    assert abs(float(lim) - float(lim2)) < 1e-3 * abs(float(lim))


def test_profile_axis1_parabolic_maximum(twin_opt_design, twin_opt_params):
    vals = [p.imspe for p in twin_profile(twin_opt_design, twin_opt_params, 1, DELTAS, CTX)]
    assert quadratic_coefficient(DELTAS, vals) < 0


def test_profile_single_point(twin_opt_design, twin_opt_params):
    (p,) = twin_profile(twin_opt_design, twin_opt_params, 2, [1e-6], CTX)
    assert p.imspe == imspe(twin_opt_design, twin_opt_params, CTX).imspe


def test_profile_validation(twin_opt_design, twin_opt_params):
    with pytest.raises(ValueError):
        twin_profile(twin_opt_design, twin_opt_params, 2, [1e-3, 1e-4], CTX)
    with pytest.raises(ValueError):
        twin_profile(twin_opt_design, twin_opt_params, 2, [0.0], CTX)
    with pytest.raises(ValueError):
        twin_profile(twin_opt_design, twin_opt_params, 3, [1e-3], CTX)
    with pytest.raises(ValueError):
        twin_profile(twin_opt_design.without_twin(), twin_opt_params, 2, [1e-3], CTX)


def test_richardson_exact_on_quadratic_in_delta_squared():
    ds = [0.1, 0.2, 0.4]
    vals = [3 + 5 * d ** 2 - 7 * d ** 4 for d in ds]
    assert abs(float(richardson_limit(ds, vals)) - 3) < 1e-12


# -- hue grid ----------------------------------------------------------------------


def test_hue_grid_properties(twin_opt_design, twin_opt_params):
    ref = imspe(twin_opt_design, twin_opt_params, CTX).imspe
    n = 5
    nodes = hue_grid(twin_opt_design, twin_opt_params, n, ref, CTX, jobs=1)
    assert len(nodes) == n * n
    G = np.array([nd.gap for nd in nodes]).reshape(n, n)
    assert G[n // 2, n // 2] == -16
    assert np.array_equal(G, G[::-1, ::-1])
    axis = np.linspace(-1, 1, n)
    assert [nd.u for nd in nodes[:n]] == list(axis) and all(nd.v == -1 for nd in nodes[:n])
    # the u = 0 column reproduces axis-2 profile values
    for r, v in enumerate(axis):
        if v == 0:
            continue
        (p,) = twin_profile(twin_opt_design, twin_opt_params, 2, [abs(v)], CTX)
        from imspe_lab.imspe import gap_value
        assert G[r, n // 2] == float(gap_value(p.imspe, ref))


def test_hue_grid_sentinel_on_coincidence(twin_opt_params):
    # twin lands on a fixed point: exact duplicate, recorded as NaN
    base = Design.with_twins([[0.5, 0.5], [-0.5, 0.0]], (0.0, 0.0), (0.0, 1e-3))
    nodes = hue_grid(base, twin_opt_params, 3, 0.0, CTX, jobs=1)
    assert all(nd.status == "ok" for nd in nodes)
    base = Design.with_twins([[1.0, 1.0], [-0.5, 0.0]], (0.0, 0.0), (0.0, 1e-3))
    nodes = hue_grid(base, twin_opt_params, 3, 0.0, CTX, jobs=1)
    corner = nodes[-1]
    assert corner.u == 1 and corner.v == 1
    assert math.isnan(corner.gap) and corner.status != "ok"


def test_hue_grid_validation(twin_opt_design, twin_opt_params):
    with pytest.raises(ValueError):
        hue_grid(twin_opt_design, twin_opt_params, 1, 0.0, CTX)
    with pytest.raises(ValueError):
        hue_grid(twin_opt_design.without_twin(), twin_opt_params, 3, 0.0, CTX)


# -- tornado ----------------------------------------------------------------------


def test_tornado_examples(twin_opt_design, twin_opt_params):
    ref = imspe(twin_opt_design, twin_opt_params, CTX).imspe
    line = D([[0.2, -0.9], [0.2, -0.1], [0.2, 0.4], [0.2, 0.8]])
    rep = random_baseline(2, twin_opt_params, ref, 0, CTX, designs=[line, twin_opt_design])
    (d0, g0), (d1, g1) = tornado_data(rep, ref)
    assert d0 == 0 and math.isfinite(g0)
    assert d1 == pytest.approx(0.767117) and g1 == -math.inf


def test_tornado_skips_failed_records():
    rep = BaselineReport(1, 1, 0, None, None, None, [BaselineRecord(0, None, None, None, "error:x")])
    assert tornado_data(rep, 0.0) == []
