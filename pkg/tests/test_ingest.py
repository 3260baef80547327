import json

import pytest
from hypothesis import given, strategies as st

from dialect_audit.ingest import (
    MIN_TOKENS,
    CleanConfig,
    CleanPost,
    CorpusError,
    DuplicateIdError,
    RawPost,
    Rejected,
    clean,
    clean_post_to_record,
    load_corpus,
    record_to_clean_post,
)


def make(text, **kw):
    return RawPost(id=kw.pop("id", "p1"), text=text, **kw)


def test_link_posts_rejected_outright():
    out = clean(make("check this out https://example.com/x right now folks"))
    assert out == Rejected("p1", "contains_link")
    out = clean(make("go to www.example.com for the details please"))
    assert out == Rejected("p1", "contains_link")


def test_link_rejection_happens_before_rewriting():
    # The mention would otherwise be rewritten; rejection reason proves the
    # URL check ran first.
    out = clean(make("@friend see https://example.com now ok ok ok"))
    assert isinstance(out, Rejected)
    assert out.reason == "contains_link"


def test_mentions_anonymized():
    out = clean(make("hey @SomeUser123 what are you doing later tonight"))
    assert isinstance(out, CleanPost)
    assert "@username" in out.text
    assert "SomeUser123" not in out.text


def test_curly_quotes_normalized():
    out = clean(make("she can’t believe it happened again today honestly"))
    assert isinstance(out, CleanPost)
    assert "can't" in out.text
    assert "’" not in out.text


def test_emoji_rewritten_to_descriptor_token():
    out = clean(make("that was so funny \U0001F602 i cannot stop laughing"))
    assert isinstance(out, CleanPost)
    assert ":face_with_tears_of_joy:" in out.text.split()
    assert "\U0001F602" not in out.text


def test_whitespace_collapsed_and_counted():
    out = clean(make("one   two\tthree \n four five six"))
    assert isinstance(out, CleanPost)
    assert out.text == "one two three four five six"
    assert out.token_count == 6


def test_short_post_boundary():
    assert isinstance(clean(make("one two three four five")), Rejected)
    kept = clean(make("one two three four five six"))
    assert isinstance(kept, CleanPost)
    assert kept.token_count == MIN_TOKENS


def test_length_rule_counts_rewritten_tokens():
    # Five raw words, but the emoji descriptor brings the count to six.
    out = clean(make("i am so happy now \U0001F602"))
    assert isinstance(out, CleanPost)
    assert out.token_count == 6


def test_min_tokens_configurable():
    out = clean(make("just five short words here"), CleanConfig(min_tokens=5))
    assert isinstance(out, CleanPost)


def test_coordinates_and_timestamp_carried_through():
    out = clean(make("six whole tokens in this post",
                     latitude=33.7, longitude=-84.4, timestamp="2020-06-01"))
    assert isinstance(out, CleanPost)
    assert (out.latitude, out.longitude, out.timestamp) == (33.7, -84.4, "2020-06-01")


def test_record_round_trip():
    post = CleanPost(id="a", text="x y z p q r", token_count=6,
                     latitude=1.0, longitude=2.0, timestamp="t")
    assert record_to_clean_post(clean_post_to_record(post)) == post
    bare = CleanPost(id="b", text="x y z p q r", token_count=6)
    rec = clean_post_to_record(bare)
    assert "lat" not in rec and "lon" not in rec and "ts" not in rec
    assert record_to_clean_post(rec) == bare


def write_lines(tmp_path, lines):
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_load_corpus_order_preserved(tmp_path):
    path = write_lines(tmp_path, [
        json.dumps({"id": "b", "text": "later alligator"}),
        json.dumps({"id": "a", "text": "hello there"}),
    ])
    assert [p.id for p in load_corpus(path)] == ["b", "a"]


def test_load_corpus_malformed_raises_without_collector(tmp_path):
    path = write_lines(tmp_path, ['{"id": "a", "text": broken}'])
    with pytest.raises(CorpusError):
        list(load_corpus(path))


def test_load_corpus_malformed_collected_and_skipped(tmp_path):
    path = write_lines(tmp_path, [
        json.dumps({"id": "a", "text": "fine"}),
        '{"id": "b", "text": broken}',
        json.dumps({"id": "c"}),  # missing text
        json.dumps({"id": "d", "text": "also fine"}),
    ])
    seen = []
    posts = list(load_corpus(path, on_malformed=lambda n, r: seen.append(n)))
    assert [p.id for p in posts] == ["a", "d"]
    assert seen == [2, 3]


def test_load_corpus_duplicate_id_always_raises(tmp_path):
    path = write_lines(tmp_path, [
        json.dumps({"id": "a", "text": "one"}),
        json.dumps({"id": "a", "text": "two"}),
    ])
    with pytest.raises(DuplicateIdError):
        list(load_corpus(path, on_malformed=lambda n, r: None))


def test_load_corpus_coordinate_range_checked(tmp_path):
    path = write_lines(tmp_path, [
        json.dumps({"id": "a", "text": "x", "lat": 91.0, "lon": 0.0}),
    ])
    with pytest.raises(CorpusError, match="latitude"):
        list(load_corpus(path))


@given(st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=80))
def test_clean_is_total_and_token_count_consistent(text):
    out = clean(RawPost(id="p", text=text))
    if isinstance(out, CleanPost):
        assert out.token_count == len(out.text.split()) >= MIN_TOKENS
    else:
        assert out.reason in ("too_short", "contains_link")


@given(st.lists(st.sampled_from(
    ["hello", "@user", "don’t", "\U0001F602", "world", "ok"]),
    min_size=6, max_size=12))
def test_clean_idempotent_on_clean_text(words):
    first = clean(RawPost(id="p", text=" ".join(words)))
    if isinstance(first, CleanPost):
        again = clean(RawPost(id="p", text=first.text))
        assert isinstance(again, CleanPost)
        assert again.text == first.text
