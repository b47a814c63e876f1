import io
import json
import random

import pytest

from webroutine.ingest import (
    IngestError,
    OverlapError,
    SpatialResolution,
    SymbolTable,
    VisitEvent,
    parse_events,
    read_events,
    resolve_location,
    write_events,
)

HEADER = "user_id,timestamp,url,domain,category,active_seconds\n"


def csv_bytes(*rows):
    return (HEADER + "".join(r + "\n" for r in rows)).encode()


def test_toy_fixture_parses_to_nine_ordered_events(toy_events):
    assert len(toy_events) == 9
    starts = [e.start_time for e in toy_events]
    assert starts == sorted(starts)
    assert [e.url for e in toy_events] == ["A1", "A2", "A3", "B1", "B2", "B3", "A4", "C1", "A5"]


def test_empty_file_with_header():
    assert parse_events(HEADER.encode()) == {}


def test_negative_duration_reports_line():
    data = csv_bytes("u,100,a/1,a,x,5", "u,200,a/2,a,x,-3")
    with pytest.raises(IngestError) as err:
        parse_events(data)
    assert err.value.line == 3


@pytest.mark.parametrize(
    "row",
    ["u,100,a/1,a,x", "u,abc,a/1,a,x,5", "u,100,a/1,a,x,1.5", "u,100,,a,x,5"],
)
def test_malformed_rows(row):
    with pytest.raises(IngestError) as err:
        parse_events(csv_bytes(row))
    assert err.value.line == 2


def test_missing_column_in_header():
    with pytest.raises(IngestError):
        parse_events(b"user_id,timestamp,url,domain,active_seconds\n")


def test_overlap_names_user_and_timestamps():
    data = csv_bytes("alice,100,a/1,a,x,50", "alice,120,b/1,b,x,10")
    with pytest.raises(OverlapError) as err:
        parse_events(data)
    assert err.value.user_id == "alice"
    assert (err.value.first_start, err.value.second_start) == (100, 120)
    assert "alice" in str(err.value)


def test_back_to_back_and_zero_duration_are_fine():
    data = csv_bytes("u,100,a/1,a,x,20", "u,120,b/1,b,x,0", "u,120,c/1,c,x,5")
    events = parse_events(data)["u"]
    assert [e.domain for e in events] == ["a", "b", "c"]


def test_users_grouped_and_sorted():
    data = csv_bytes("b,300,x/1,x,k,1", "a,200,y/1,y,k,1", "b,100,z/1,z,k,1")
    users = parse_events(data)
    assert list(users) == ["a", "b"]
    assert [e.start_time for e in users["b"]] == [100, 300]


def test_whitespace_is_normalized():
    users = parse_events(csv_bytes(" u , 100 , a/1 , a , news , 3 "))
    ev = users["u"][0]
    assert (ev.user_id, ev.url, ev.domain, ev.category, ev.active_seconds) == ("u", "a/1", "a", "news", 3)


def test_row_order_does_not_matter(toy_events):
    rows = [f"{e.user_id},{e.start_time},{e.url},{e.domain},{e.category},{e.active_seconds}" for e in toy_events]
    rng = random.Random(3)
    for _ in range(5):
        rng.shuffle(rows)
        assert parse_events(csv_bytes(*rows))["toy"] == toy_events


def test_jsonl_format(tmp_path, toy_events):
    path = tmp_path / "log.jsonl"
    with open(path, "w") as fh:
        for e in toy_events:
            fh.write(json.dumps({"user_id": e.user_id, "timestamp": e.start_time, "url": e.url,
                                 "domain": e.domain, "category": e.category, "active_seconds": e.active_seconds}) + "\n")
    assert read_events(path)["toy"] == toy_events


def test_jsonl_bad_record_has_line(tmp_path):
    path = tmp_path / "log.ndjson"
    path.write_text('{"user_id": "u", "timestamp": 1, "url": "a", "domain": "a", "category": "c", "active_seconds": 1}\n{oops\n')
    with pytest.raises(IngestError) as err:
        read_events(path)
    assert err.value.line == 2


def test_write_events_round_trip(toy_events):
    buf = io.StringIO()
    write_events(toy_events, buf)
    assert parse_events(buf.getvalue().encode())["toy"] == toy_events


def _event(url, domain, category="c", t=0):
    return VisitEvent(start_time=t, active_seconds=1, url=url, domain=domain, category=category, user_id="u")


def test_domain_collapse_and_dense_ids():
    table = SymbolTable("u", SpatialResolution.DOMAIN)
    a1 = resolve_location(_event("a.com/page1", "a.com"), SpatialResolution.DOMAIN, table)
    a2 = resolve_location(_event("a.com/page2", "a.com"), SpatialResolution.DOMAIN, table)
    b = resolve_location(_event("b.com/x", "b.com"), SpatialResolution.DOMAIN, table)
    c = resolve_location(_event("c.com/x", "c.com"), SpatialResolution.DOMAIN, table)
    assert a1 == a2 == 0
    assert (b, c) == (1, 2)


def test_table_is_bound_to_user_and_resolution():
    table = SymbolTable("v", SpatialResolution.DOMAIN)
    with pytest.raises(ValueError):
        resolve_location(_event("a/1", "a"), SpatialResolution.DOMAIN, table)
    table = SymbolTable("u", SpatialResolution.URL)
    with pytest.raises(ValueError):
        resolve_location(_event("a/1", "a"), SpatialResolution.DOMAIN, table)


def test_toy_symbol_counts_per_resolution(toy_events):
    counts = {}
    for res in SpatialResolution:
        table = SymbolTable("toy", res)
        for e in toy_events:
            resolve_location(e, res, table)
        counts[res] = len(table)
    assert counts[SpatialResolution.URL] == 9
    assert counts[SpatialResolution.DOMAIN] == 3
    assert counts[SpatialResolution.CATEGORY] <= counts[SpatialResolution.DOMAIN]


def test_round_trip_and_monotone_resolution():
    rng = random.Random(0)
    events = []
    for i in range(300):
        d = rng.randrange(20)
        events.append(_event(f"d{d}/p{rng.randrange(6)}", f"d{d}", f"c{d % 4}", t=i))
    sizes = {}
    for res in SpatialResolution:
        table = SymbolTable("u", res)
        ids = [resolve_location(e, res, table) for e in events]
        assert sorted(set(ids)) == list(range(len(table)))
        for sid in range(len(table)):
            assert table.id_of(table.label(sid)) == sid
        sizes[res] = len(table)
    assert sizes[SpatialResolution.CATEGORY] <= sizes[SpatialResolution.DOMAIN] <= sizes[SpatialResolution.URL]
