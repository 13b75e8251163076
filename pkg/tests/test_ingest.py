import logging
from datetime import date, datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokentopo.ingest import (DailyGraph, Edge, InputError, PriceSeries, TokenTransaction,
                              build_daily_graph, daily_graphs, edge_weights, load_prices,
                              load_transactions, top_k_filter)

DAY = date(2021, 3, 4)
T0 = int(datetime(2021, 3, 4, tzinfo=timezone.utc).timestamp())


def tx(a, b, amount, offset=0, token="bat"):
    return TokenTransaction(token, a, b, amount, T0 + offset)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_drops_self_loops(tmp_path):
    p = write(tmp_path / "tx.csv", "token,from,to,amount,timestamp\n"
              f"bat,a,b,5,{T0 + 9}\nbat,c,c,1,{T0}\nbat,b,c,2,{T0 + 1}\nzrx,a,b,1,{T0}\n")
    out = load_transactions(p, "bat")
    assert [(t.sender, t.receiver) for t in out] == [("b", "c"), ("a", "b")]


def test_load_empty_file(tmp_path):
    p = write(tmp_path / "tx.csv", "token,from,to,amount,timestamp\n")
    assert load_transactions(p) == []


def test_negative_amount_names_line(tmp_path):
    p = write(tmp_path / "tx.csv", f"token,from,to,amount,timestamp\nbat,a,b,1,{T0}\nbat,a,b,-3,{T0}\n")
    with pytest.raises(InputError, match=":3:"):
        load_transactions(p)


def test_malformed_row(tmp_path):
    p = write(tmp_path / "tx.csv", "token,from,to,amount,timestamp\nbat,a,b,1\n")
    with pytest.raises(InputError, match=":2:"):
        load_transactions(p)


def test_bad_header(tmp_path):
    p = write(tmp_path / "tx.csv", "a,b,c\n")
    with pytest.raises(InputError):
        load_transactions(p)


def test_unknown_token_warns(tmp_path, caplog):
    p = write(tmp_path / "tx.csv", f"token,from,to,amount,timestamp\nbat,a,b,1,{T0}\n")
    with caplog.at_level(logging.WARNING):
        assert load_transactions(p, "nope") == []
    assert "nope" in caplog.text


def test_load_prices(tmp_path):
    p = write(tmp_path / "p.csv", "token,date,open\nbat,2021-01-02,2.0\nbat,2021-01-01,1.5\n")
    s = load_prices(p)["bat"]
    assert s.dates == (date(2021, 1, 1), date(2021, 1, 2)) and s.prices == (1.5, 2.0)


@pytest.mark.parametrize("body", ["bat,2021-01-01,0\n", "bat,2021-01-01,x\n",
                                  "bat,2021-01-01,1\nbat,2021-01-01,2\n"])
def test_bad_prices(tmp_path, body):
    p = write(tmp_path / "p.csv", "token,date,open\n" + body)
    with pytest.raises(InputError):
        load_prices(p)


def test_price_series_invariants():
    with pytest.raises(InputError):
        PriceSeries("x", (date(2020, 1, 2), date(2020, 1, 1)), (1.0, 1.0))


def test_weight_formula():
    e = edge_weights({("a", "b"): 10.0, ("b", "c"): 110.0, ("a", "c"): 60.0}, 9.0)
    assert e[("a", "b")].weight == 1.0
    assert e[("b", "c")].weight == pytest.approx(0.1)
    assert e[("a", "c")].weight == pytest.approx(2 / 11)


def test_equal_amounts_weight_one():
    e = edge_weights({("a", "b"): 4.0, ("b", "c"): 4.0}, 9.0)
    assert {x.weight for x in e.values()} == {1.0}


def test_build_daily_graph_aggregates_both_directions():
    g = build_daily_graph([tx("a", "b", 3), tx("b", "a", 2, 5), tx("b", "c", 1, 7), tx("c", "c", 9)], DAY)
    assert g.edges[("a", "b")].amount == 5
    assert g.nodes == frozenset("abc")
    assert g.n_transactions == 3
    assert g.edges[("a", "b")].weight == pytest.approx(0.1)


def test_zero_amount_kept():
    g = build_daily_graph([tx("a", "b", 0), tx("b", "c", 10)], DAY)
    assert g.edges[("a", "b")].weight == 1.0


def test_wrong_day_rejected():
    with pytest.raises(ValueError):
        build_daily_graph([tx("a", "b", 1, 86400)], DAY)


def test_empty_day():
    g = build_daily_graph([], DAY, token="bat")
    assert g.is_empty and not g.nodes


def star(leaves=5):
    return build_daily_graph([tx("h", f"l{i}", i + 1.0, i) for i in range(leaves)], DAY)


def test_top_k_star():
    g = top_k_filter(star(), 2)
    # leaves tie on degree 1, l4 carries the largest amount
    assert g.nodes == frozenset({"h", "l4"})
    assert list(g.edges) == [("h", "l4")]
    assert g.edges[("h", "l4")].weight == 1.0


def test_top_k_lexicographic_tiebreak():
    g = build_daily_graph([tx("h", "z", 1), tx("h", "y", 1, 1), tx("h", "x", 1, 2)], DAY)
    assert top_k_filter(g, 2).nodes == frozenset({"h", "x"})


def test_top_k_small_graph_unchanged():
    g = star()
    assert top_k_filter(g, 150) is g


def test_pre_filter_keeps_weights():
    g = star()
    kept = top_k_filter(g, 3, renormalize=False)
    for p, e in kept.edges.items():
        assert e.weight == g.edges[p].weight


def graph_from(edges):
    txs = [tx(f"n{a}", f"n{b}", amt, i) for i, (a, b, amt) in enumerate(edges) if a != b]
    return build_daily_graph(txs, DAY, token="bat")


edge_lists = st.lists(st.tuples(st.integers(0, 12), st.integers(0, 12),
                                st.floats(0, 1000, allow_nan=False)), max_size=40)


@settings(max_examples=80, deadline=None)
@given(edge_lists, st.integers(1, 10))
def test_top_k_idempotent(edges, k):
    once = top_k_filter(graph_from(edges), k)
    assert top_k_filter(once, k) == once


@settings(max_examples=80, deadline=None)
@given(edge_lists, st.randoms(use_true_random=False))
def test_aggregation_order_independent(edges, rnd):
    shuffled = edges[:]
    rnd.shuffle(shuffled)
    a = graph_from(edges)
    txs = [tx(f"n{x}", f"n{y}", amt, 0) for x, y, amt in shuffled if x != y]
    b = build_daily_graph(txs, DAY, token="bat")
    assert a.nodes == b.nodes and a.edges.keys() == b.edges.keys()
    for p in a.edges:
        assert a.edges[p].amount == pytest.approx(b.edges[p].amount, rel=1e-12, abs=1e-9)
        assert a.edges[p].weight == pytest.approx(b.edges[p].weight, rel=1e-9, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.integers(0, 10**12), min_size=1, max_size=30))
def test_weight_range_and_monotonicity(micro):
    # amounts are decimal token units; micro-unit resolution
    amounts = [m / 1e6 for m in micro]
    e = edge_weights({(f"a{i}", f"b{i}"): a for i, a in enumerate(amounts)}, 9.0)
    pairs = sorted((x.amount, x.weight) for x in e.values())
    assert all(0.1 - 1e-12 <= w <= 1.0 for _, w in pairs)
    for (a1, w1), (a2, w2) in zip(pairs, pairs[1:]):
        if a2 > a1:
            assert w2 < w1


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(0, 1e300, allow_nan=False), min_size=1, max_size=30))
def test_weight_non_increasing_any_float(amounts):
    e = edge_weights({(f"a{i}", f"b{i}"): a for i, a in enumerate(amounts)}, 9.0)
    pairs = sorted((x.amount, x.weight) for x in e.values())
    assert all(0.1 - 1e-12 <= w <= 1.0 for _, w in pairs)
    assert all(w2 <= w1 for (_, w1), (_, w2) in zip(pairs, pairs[1:]))


def test_daily_graphs_groups_by_utc_day():
    txs = [tx("a", "b", 1), tx("a", "b", 1, 86400), tx("c", "c", 1, 2 * 86400)]
    gs = daily_graphs(txs)
    assert list(gs) == [DAY, date(2021, 3, 5)]


def test_unknown_normalization():
    with pytest.raises(ValueError):
        daily_graphs([], normalization="global")


def test_daily_graph_degree():
    g = DailyGraph("t", DAY, frozenset("abc"), {("a", "b"): Edge(1, 1), ("a", "c"): Edge(1, 1)})
    assert g.degree() == {"a": 2, "b": 1, "c": 1}
