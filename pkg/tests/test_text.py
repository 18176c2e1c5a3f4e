import pytest
from hypothesis import given, strategies as st

from teigo.errors import ValidationError
from teigo.text import (
    Sentence,
    TokenSpan,
    align_spans,
    decode_biluo,
    encode_biluo,
    split_sentences,
    tokenize,
)


class TestTokenize:
    def test_empty(self):
        assert tokenize("") == []

    def test_punctuation_peeling(self):
        assert [t.surface for t in tokenize("on 26 May 2023.")] == [
            "on", "26", "May", "2023", ".",
        ]

    def test_offsets_reconstruct_text(self):
        text = 'She said, "May 26, 2023!" (twice).'
        for tok in tokenize(text):
            assert text[tok.start : tok.end] == tok.surface

    def test_mixed_digits_letters_whole(self):
        assert [t.surface for t in tokenize("at 3pm")] == ["at", "3pm"]

    def test_internal_punctuation_kept(self):
        assert [t.surface for t in tokenize("10:30 o'clock 2023-05-26")] == [
            "10:30", "o'clock", "2023-05-26",
        ]

    def test_idempotent_on_surfaces(self):
        tokens = tokenize("Meet me... on (May 26), ok?")
        again = tokenize(" ".join(t.surface for t in tokens))
        assert [t.surface for t in again] == [t.surface for t in tokens]

    def test_tokens_sorted_disjoint(self):
        tokens = tokenize("a, b; c: d!")
        for prev, cur in zip(tokens, tokens[1:]):
            assert prev.end <= cur.start


class TestSentences:
    def test_empty(self):
        assert split_sentences([]) == []

    def test_single(self):
        assert split_sentences(tokenize("Hi .")) == [Sentence(0, 1)]

    def test_two_sentences(self):
        assert split_sentences(tokenize("A . B .")) == [Sentence(0, 1), Sentence(2, 3)]

    def test_lowercase_follower_blocks_boundary(self):
        # abbreviation-like period followed by lowercase continues the sentence
        tokens = tokenize("It fell approx . two points today .")
        assert split_sentences(tokens) == [Sentence(0, len(tokens) - 1)]

    def test_partial_final_sentence_closed(self):
        tokens = tokenize("No terminal here")
        assert split_sentences(tokens) == [Sentence(0, 2)]

    def test_partition(self):
        tokens = tokenize("One . Two ! Three ? tail")
        sents = split_sentences(tokens)
        covered = []
        for s in sents:
            covered.extend(range(s.first_token, s.last_token + 1))
        assert covered == list(range(len(tokens)))


class TestAlignSpans:
    def test_exact_cover(self):
        tokens = tokenize("met on 26 May 2023 .")
        text = "met on 26 May 2023 ."
        start, end = text.index("26"), text.index("2023") + 4
        assert align_spans([(start, end)], tokens) == [TokenSpan(2, 4)]

    def test_partial_token_snaps_to_cover(self):
        tokens = tokenize("abc defgh ijk")
        # covers only half of "defgh"
        assert align_spans([(4, 6)], tokens) == [TokenSpan(1, 1)]

    def test_span_in_gap_dropped(self):
        text = "ab  cd"
        tokens = tokenize(text)
        assert align_spans([(2, 3)], tokens) == []

    def test_overlap_resolution_longer_wins(self):
        tokens = tokenize("a b c d e")
        spans = [(0, 3), (2, 9)]  # tokens (0,1) vs (1,4); longer wins
        assert align_spans(spans, tokens) == [TokenSpan(1, 4)]


class TestBiluo:
    def test_encode_examples(self):
        assert encode_biluo([TokenSpan(1, 3)], 5) == ["O", "B", "I", "L", "O"]
        assert encode_biluo([TokenSpan(2, 2)], 5) == ["O", "O", "U", "O", "O"]
        assert encode_biluo([], 3) == ["O", "O", "O"]

    def test_encode_overlap_error(self):
        with pytest.raises(ValidationError):
            encode_biluo([TokenSpan(0, 2), TokenSpan(2, 3)], 5)

    def test_decode_examples(self):
        assert decode_biluo(["O", "B", "I", "L", "O"]) == [TokenSpan(1, 3)]
        assert decode_biluo(["U", "U"]) == [TokenSpan(0, 0), TokenSpan(1, 1)]

    def test_decode_invalid_names_index(self):
        with pytest.raises(ValidationError, match="index 1"):
            decode_biluo(["O", "I", "O"])
        with pytest.raises(ValidationError):
            decode_biluo(["B", "O"])
        with pytest.raises(ValidationError):
            decode_biluo(["B", "I"])

    @given(st.data())
    def test_round_trip_property(self, data):
        n = data.draw(st.integers(min_value=1, max_value=60))
        spans = []
        cursor = 0
        while cursor < n:
            if data.draw(st.booleans()):
                last = data.draw(st.integers(min_value=cursor, max_value=n - 1))
                spans.append(TokenSpan(cursor, last))
                cursor = last + 2
            else:
                cursor += 1
        assert decode_biluo(encode_biluo(spans, n)) == spans
