import math

import numpy as np
import pytest

from ctstreak.core.exceptions import GeometryError
from ctstreak.core.geometry import (
    TangencyEvent,
    canonical_line,
    distinct_t_count,
    enumerate_streak_candidates,
    is_strictly_convex,
    line_tangencies,
    same_line,
)
from ctstreak.core.phantom_models import Disk, Ellipse, MetalRegion, Polygon


def _region(*primitives):
    return MetalRegion(primitives=list(primitives), alpha=[-1.0] * len(primitives))


def test_canonical_line():
    assert canonical_line(math.pi, 1.0) == (0.0, -1.0)
    phi, s = canonical_line(-math.pi / 2, 0.3)
    assert phi == pytest.approx(math.pi / 2)
    assert s == pytest.approx(-0.3)
    phi, s = canonical_line(3 * math.pi / 4, 0.2)
    assert phi == pytest.approx(-math.pi / 4)
    assert s == pytest.approx(-0.2)
    phi, s = canonical_line(0.4 + 2 * math.pi, 0.1)
    assert (phi, s) == (pytest.approx(0.4), 0.1)


def test_same_line_handles_the_label_seam():
    assert same_line((math.pi / 2, 0.1), (-math.pi / 2, -0.1))
    assert same_line((math.pi / 2 - 1e-8, 0.1), (-math.pi / 2 + 1e-8, -0.1))
    assert not same_line((0.0, 0.1), (0.0, 0.2))


def test_disk_tangency_point():
    region = _region(Disk(center=(0.0, 0.0), radius=1.0))
    events = line_tangencies(region, 0.0, 1.0)
    assert len(events) == 1
    assert events[0].kind == 'smooth-arc'
    assert events[0].point == pytest.approx((1.0, 0.0))
    assert not events[0].flagged
    assert line_tangencies(region, 0.0, 0.5) == []


def test_near_tangency_is_flagged():
    region = _region(Disk(center=(0.0, 0.0), radius=0.5))
    events = line_tangencies(region, 0.3, 0.5 + 5e-7)
    assert len(events) == 1
    assert events[0].flagged
    assert distinct_t_count(events) == 0


def test_tangency_inside_another_primitive_is_discarded():
    region = _region(Disk(center=(0.0, 0.0), radius=0.3), Disk(center=(0.1, 0.0), radius=0.1))
    # x = 0.2 touches the small disk at a point strictly inside the large one
    assert line_tangencies(region, 0.0, 0.2) == []


def test_edge_and_vertex_events():
    square = Polygon(vertices=[(-0.1, -0.1), (0.1, -0.1), (0.1, 0.1), (-0.1, 0.1)])
    events = line_tangencies(_region(square), math.pi / 2, 0.1)
    kinds = sorted(e.kind for e in events)
    assert kinds == ['edge-segment', 'vertex-fan', 'vertex-fan']
    edge = next(e for e in events if e.kind == 'edge-segment')
    assert edge.t_interval == pytest.approx((-0.1, 0.1))
    assert distinct_t_count(events) >= 2

    # A line through one corner with its normal inside the corner cone
    corner = line_tangencies(_region(square), math.pi / 4, 0.2 / math.sqrt(2.0))
    assert [e.kind for e in corner] == ['vertex-fan']


def test_edge_event_requires_an_interval():
    with pytest.raises(GeometryError):
        TangencyEvent(point=(0.0, 0.0), t=0.0, kind='edge-segment')


def test_two_disks_have_four_common_tangents(two_disk_phantom):
    lines = enumerate_streak_candidates(two_disk_phantom.metals)
    assert len(lines) == 4
    internal = math.acos(1.0 / 3.0)
    expected = [(-internal, 0.0), (internal, 0.0), (math.pi / 2, -0.1), (math.pi / 2, 0.1)]
    for line, (phi, s) in zip(lines, expected):
        assert line.phi == pytest.approx(phi, abs=1e-9)
        assert line.s == pytest.approx(s, abs=1e-9)
        assert line.span_dim == 2
        assert line.tangency_count == 2
        assert line.source == 'geometry'
        assert all(e.kind == 'smooth-arc' for e in line.tangencies)


def test_strictly_convex_metal_has_no_streaks(single_disk_phantom):
    region = single_disk_phantom.metals[0]
    assert is_strictly_convex(region)
    assert enumerate_streak_candidates([region]) == []

    ellipse = _region(Ellipse(center=(0.0, 0.0), axes=(0.2, 0.1), angle=0.3))
    assert enumerate_streak_candidates([ellipse]) == []


def test_quarter_disk_streaks_follow_its_edges(quarter_disk_phantom):
    region = quarter_disk_phantom.metals[0]
    assert not is_strictly_convex(region)
    lines = enumerate_streak_candidates([region])
    assert len(lines) == 2
    assert lines[0].phi == pytest.approx(0.0, abs=1e-9)
    assert lines[1].phi == pytest.approx(math.pi / 2, abs=1e-9)
    for line in lines:
        assert line.s == pytest.approx(0.0, abs=1e-9)
        assert any(e.kind == 'edge-segment' for e in line.tangencies)


def test_disk_and_ellipse_tangents_are_found():
    region = _region(Disk(center=(-0.3, 0.0), radius=0.1), Ellipse(center=(0.3, 0.0), axes=(0.1, 0.1)))
    lines = enumerate_streak_candidates([region])
    # A circular ellipse gives the same four tangents as two disks
    assert len(lines) == 4
    assert sorted(round(abs(line.s), 6) for line in lines) == [0.0, 0.0, 0.1, 0.1]


def test_regions_are_independent_subdomains():
    left = _region(Disk(center=(-0.3, 0.0), radius=0.1))
    right = _region(Disk(center=(0.3, 0.0), radius=0.1))
    lines = enumerate_streak_candidates([left, right], source='scatter')
    assert len(lines) == 4
    assert {line.source for line in lines} == {'scatter'}


def test_empty_input_and_multi_primitive_convexity():
    with pytest.raises(GeometryError):
        enumerate_streak_candidates([])
    with pytest.raises(GeometryError):
        is_strictly_convex(_region(Disk(center=(0.0, 0.0), radius=0.1), Disk(center=(0.5, 0.0), radius=0.1)))


@pytest.mark.filterwarnings("error::DeprecationWarning")
def test_tangency_flags_are_plain_booleans():
    disk = line_tangencies(_region(Disk(center=(0.0, 0.0), radius=0.5)), 0.3, 0.5 + 5e-7)
    square = Polygon(vertices=[(-0.1, -0.1), (0.1, -0.1), (0.1, 0.1), (-0.1, 0.1)])
    edges = line_tangencies(_region(square), math.pi / 2, 0.1)
    for event in disk + edges:
        assert type(event.flagged) is bool


def test_random_ellipses_never_streak():
    rng = np.random.default_rng(11)
    for _ in range(20):
        a, b = rng.uniform(0.05, 0.3, size=2)
        center = tuple(rng.uniform(-0.4, 0.4, size=2))
        region = _region(Ellipse(center=center, axes=(a, b), angle=float(rng.uniform(0.0, math.pi))))
        assert is_strictly_convex(region)
        assert enumerate_streak_candidates([region]) == []


@pytest.mark.parametrize("beta", [0.3, 1.1, 2.5, -0.7])
def test_rotating_the_metal_rotates_the_lines(beta):
    def rotated(x, y):
        return (x * math.cos(beta) - y * math.sin(beta), x * math.sin(beta) + y * math.cos(beta))

    base = enumerate_streak_candidates([_region(Disk(center=(-0.3, 0.0), radius=0.1),
                                                Disk(center=(0.3, 0.0), radius=0.1))])
    turned = enumerate_streak_candidates([_region(Disk(center=rotated(-0.3, 0.0), radius=0.1),
                                                  Disk(center=rotated(0.3, 0.0), radius=0.1))])
    assert len(turned) == len(base) == 4
    for line in base:
        expected = canonical_line(line.phi + beta, line.s)
        assert any(same_line(expected, (other.phi, other.s), phi_tol=1e-8, s_tol=1e-8) for other in turned)
