import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conceptnav.knowledge import (
    DEFAULT_RELATIONS,
    KnowledgeTriple,
    MalformedLineError,
    NetworkError,
    fetch_remote,
    ingest_snapshot,
    normalize_label,
    query_by_objects,
)


def write_snapshot(tmp_path, lines, name="snap.tsv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


class TestIngest:
    def test_bed_atlocation_bedroom(self, tmp_path):
        path = write_snapshot(tmp_path, ["bed\tAtLocation\tbedroom"])
        store = ingest_snapshot(path)
        assert store.triples == {KnowledgeTriple("bed", "AtLocation", "bedroom")}

    def test_empty_file(self, tmp_path):
        store = ingest_snapshot(write_snapshot(tmp_path, []))
        assert len(store) == 0

    def test_duplicates_collapse(self, tmp_path):
        lines = [
            "bed\tAtLocation\tbedroom",
            "lamp\tAtLocation\tbedroom",
            "bed\tAtLocation\tbedroom",
        ]
        store = ingest_snapshot(write_snapshot(tmp_path, lines))
        assert len(store) == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ingest_snapshot(tmp_path / "nope.tsv")

    def test_relation_filtering(self, tmp_path):
        lines = ["bed\tAtLocation\tbedroom", "bed\tWeirdRel\tbedroom"]
        store = ingest_snapshot(write_snapshot(tmp_path, lines))
        assert len(store) == 1
        assert store.skipped == 0  # filtered, not malformed

    def test_malformed_line_skipped_with_count(self, tmp_path):
        lines = ["bed\tAtLocation\tbedroom", "not a triple", "a\tAtLocation\ta"]
        store = ingest_snapshot(write_snapshot(tmp_path, lines))
        assert len(store) == 1
        assert store.skipped == 2

    def test_malformed_line_strict_reports_line_number(self, tmp_path):
        lines = ["bed\tAtLocation\tbedroom", "garbage line"]
        with pytest.raises(MalformedLineError) as exc:
            ingest_snapshot(write_snapshot(tmp_path, lines), strict=True)
        assert exc.value.line_no == 2

    def test_normalization_applied(self, tmp_path):
        path = write_snapshot(tmp_path, ["  Coffee_Table \tAtLocation\tLiving  Room"])
        store = ingest_snapshot(path)
        assert store.triples == {
            KnowledgeTriple("coffee table", "AtLocation", "living room")
        }

    def test_index_covers_both_endpoints(self, tmp_path):
        store = ingest_snapshot(write_snapshot(tmp_path, ["bed\tAtLocation\tbedroom"]))
        (triple,) = store.triples
        assert triple in store.incident("bed")
        assert triple in store.incident("bedroom")


class TestQuery:
    def setup_method(self):
        self.t1 = KnowledgeTriple("bed", "AtLocation", "bedroom")

    def test_query_by_object(self, tmp_path):
        store = ingest_snapshot(write_snapshot(tmp_path, ["bed\tAtLocation\tbedroom"]))
        assert query_by_objects(store, {"bed"}) == [self.t1]

    def test_query_matches_end_label_too(self, tmp_path):
        store = ingest_snapshot(write_snapshot(tmp_path, ["bed\tAtLocation\tbedroom"]))
        assert query_by_objects(store, {"bedroom"}) == [self.t1]

    def test_empty_objects(self, tmp_path):
        store = ingest_snapshot(write_snapshot(tmp_path, ["bed\tAtLocation\tbedroom"]))
        assert query_by_objects(store, set()) == []

    def test_unknown_label(self, tmp_path):
        store = ingest_snapshot(write_snapshot(tmp_path, ["bed\tAtLocation\tbedroom"]))
        assert query_by_objects(store, {"sofa"}) == []

    def test_sorted_deterministic(self, tmp_path):
        lines = ["bed\tLocatedNear\tlamp", "bed\tAtLocation\tbedroom"]
        store = ingest_snapshot(write_snapshot(tmp_path, lines))
        result = query_by_objects(store, {"bed"})
        assert result == sorted(result)


# hypothesis: random snapshots over a small label/relation alphabet
labels = st.sampled_from(["bed", "lamp", "sofa", "bedroom", "kitchen", "oven"])
triples = st.tuples(labels, st.sampled_from(DEFAULT_RELATIONS), labels).filter(
    lambda t: t[0] != t[2]
)


@settings(max_examples=50, deadline=None)
@given(st.lists(triples, max_size=30))
def test_ingest_idempotent(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("snap")
    lines = [f"{s}\t{r}\t{e}" for s, r, e in rows]
    path = write_snapshot(tmp, lines)
    assert ingest_snapshot(path) == ingest_snapshot(path)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(triples, max_size=30),
    st.sets(labels, max_size=3),
    st.sets(labels, max_size=3),
)
def test_query_union_property(tmp_path_factory, rows, a, b):
    tmp = tmp_path_factory.mktemp("snap")
    store = ingest_snapshot(write_snapshot(tmp, [f"{s}\t{r}\t{e}" for s, r, e in rows]))
    union = set(query_by_objects(store, a | b))
    assert union == set(query_by_objects(store, a)) | set(query_by_objects(store, b))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(labels, st.text(min_size=1, max_size=12), labels), max_size=30))
def test_all_stored_relations_in_relation_set(tmp_path_factory, rows):
    tmp = tmp_path_factory.mktemp("snap")
    lines = [f"{s}\t{r}\t{e}" for s, r, e in rows if "\t" not in r and "\n" not in r]
    store = ingest_snapshot(write_snapshot(tmp, lines))
    assert all(t.relation in DEFAULT_RELATIONS for t in store.triples)


class TestNormalize:
    def test_basic(self):
        assert normalize_label(" Coffee_Table ") == "coffee table"

    def test_collapse_spaces(self):
        assert normalize_label("a   b\tc") == "a b c"


FIXTURE_PAYLOAD = {
    "edges": [
        {
            "start": {"label": "bed"},
            "rel": {"label": "AtLocation"},
            "end": {"label": "bedroom"},
        },
        {
            "start": {"label": "bed"},
            "rel": {"label": "AtLocation"},
            "end": {"label": "hotel room"},
        },
        {"start": {"label": "bed"}, "rel": {"label": "NotInSet"}, "end": {"label": "x"}},
        {"broken": True},
    ]
}


class TestFetchRemote:
    def test_fixture_replay(self, tmp_path):
        calls = []

        def transport(url, params, timeout):
            calls.append(params)
            return FIXTURE_PAYLOAD

        out = fetch_remote(
            {"bed"},
            ("AtLocation",),
            cache_dir=tmp_path,
            allow_network=True,
            transport=transport,
        )
        assert out == [
            KnowledgeTriple("bed", "AtLocation", "bedroom"),
            KnowledgeTriple("bed", "AtLocation", "hotel room"),
        ]
        assert all(t.start == "bed" or t.end == "bed" for t in out)
        assert len(calls) == 1

    def test_cache_hit_without_network(self, tmp_path):
        def transport(url, params, timeout):
            return FIXTURE_PAYLOAD

        first = fetch_remote(
            {"bed"}, ("AtLocation",), cache_dir=tmp_path,
            allow_network=True, transport=transport,
        )
        # second call: no network permission, must be served from cache
        second = fetch_remote({"bed"}, ("AtLocation",), cache_dir=tmp_path)
        assert first == second
        cache_file = tmp_path / "bed__AtLocation.json"
        assert cache_file.exists()
        json.loads(cache_file.read_text())  # valid JSON document

    def test_network_error_after_retries(self, tmp_path):
        attempts = []

        def transport(url, params, timeout):
            attempts.append(1)
            raise ConnectionError("down")

        with pytest.raises(NetworkError):
            fetch_remote(
                {"bed"},
                ("AtLocation",),
                cache_dir=tmp_path,
                allow_network=True,
                transport=transport,
                backoff=0.0,
            )
        assert len(attempts) == 3

    def test_disabled_network_with_empty_cache(self, tmp_path):
        with pytest.raises(NetworkError):
            fetch_remote({"bed"}, ("AtLocation",), cache_dir=tmp_path)
