import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dvrpkit.mc_requests import GenerationContext, artificial_count, context_for, generate, round_half_up
from conftest import make_instance


def ctx(now, m_t=30, sizes=(1.0, 2.0), rect=(0, 10, 0, 10), **kw):
    base = dict(known_sizes=sizes, bounding_rect=rect, mean_unload=3.0, now=now, m_t=m_t, T_CO=0.5,
                t_start=0.0, t_end=100.0)
    base.update(kw)
    return GenerationContext(**base)


def test_count_examples():
    assert artificial_count(ctx(0)) == 30
    assert artificial_count(ctx(50)) == 0
    assert artificial_count(ctx(25)) == 10


def test_count_outside_window_raises():
    with pytest.raises(ValueError):
        artificial_count(ctx(50.01))
    with pytest.raises(ValueError):
        artificial_count(ctx(-1))


def test_round_half_up():
    assert round_half_up(2.5) == 3 and round_half_up(3.5) == 4 and round_half_up(2.49) == 2


def test_generate_examples():
    rng = np.random.default_rng(0)
    assert generate(ctx(50), rng) == []
    out = generate(ctx(10, sizes=(7.0,)), rng)
    assert out and all(r.size == 7.0 for r in out)
    with pytest.raises(ValueError):
        generate(ctx(10, sizes=()), rng)


def test_generate_fields():
    c = ctx(10, first_id=51)
    out = generate(c, np.random.default_rng(1))
    assert len(out) == artificial_count(c)
    assert [r.id for r in out] == list(range(51, 51 + len(out)))
    assert all(r.arrival_time == 10 and r.unload_time == 3.0 for r in out)


def test_generate_statistics():
    # count = m_t when now = t_start, so m_t controls the sample size directly
    c = ctx(0, m_t=100_000, sizes=(1.0, 2.0, 3.0, 4.0))
    out = generate(c, np.random.default_rng(42))
    xy = np.array([r.location for r in out])
    assert abs(xy[:, 0].mean() - 5) < 0.1 and abs(xy[:, 1].mean() - 5) < 0.1
    n = len(out)
    sizes = np.array([r.size for r in out])
    p = 0.25
    sigma = np.sqrt(n * p * (1 - p))
    for s in (1.0, 2.0, 3.0, 4.0):
        assert abs((sizes == s).sum() - n * p) <= 3 * sigma


@st.composite
def contexts(draw):
    t0 = draw(st.floats(0, 1000))
    span = draw(st.floats(1, 1000))
    tco = draw(st.floats(0.01, 1.0))
    cut = t0 + tco * span
    now = draw(st.floats(t0, cut))
    sizes = draw(st.lists(st.integers(1, 50).map(float), min_size=1, max_size=10))
    x0, y0 = draw(st.floats(-100, 100)), draw(st.floats(-100, 100))
    w, h = draw(st.floats(0, 100)), draw(st.floats(0, 100))
    return GenerationContext(tuple(sizes), (x0, x0 + w, y0, y0 + h), 1.0, now, draw(st.integers(1, 40)),
                             tco, t0, t0 + span)


@settings(max_examples=100)
@given(contexts(), st.integers(0, 2**32 - 1))
def test_generated_requests_in_support(c, seed):
    out = generate(c, np.random.default_rng(seed))
    x0, x1, y0, y1 = c.bounding_rect
    for r in out:
        assert x0 <= r.location[0] <= x1 and y0 <= r.location[1] <= y1
        assert r.size in c.known_sizes
    again = generate(c, np.random.default_rng(seed))
    assert again == out


@given(contexts(), st.floats(0, 1))
def test_count_nonincreasing_in_time(c, frac):
    later = c.now + frac * (c.cutoff - c.now)
    later = min(later, c.cutoff)
    c2 = GenerationContext(c.known_sizes, c.bounding_rect, c.mean_unload, later, c.m_t, c.T_CO, c.t_start, c.t_end)
    assert artificial_count(c2) <= artificial_count(c)


def test_context_for_uses_all_requests_rect_and_revealed_stats():
    inst = make_instance([(0, 0), (10, 5), (-3, 8)], sizes=[2, 4, 6], unloads=[1, 3, 100],
                         arrivals=[0, 0, 50], t_end=200)
    c = context_for(inst, [1, 2], 0.0, 0.5)
    assert c.bounding_rect == (-3, 10, 0, 8)
    assert c.known_sizes == (2, 4) and c.mean_unload == 2 and c.m_t == 2 and c.first_id == 4
