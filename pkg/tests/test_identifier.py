import itertools

import pytest
from hypothesis import given, strategies as st

from unaware.identifier import (
    ANNOTATION_OPTIONS,
    NONE_OF_THE_ABOVE,
    Annotation,
    LlmConfig,
    ProtectedCategory,
    TrapBand,
    TrapItem,
    VoteSheet,
    annotation_failed,
    cohen_kappa,
    cohen_kappa_per_category,
    format_llm_reply,
    identify_dictionary,
    identify_llm,
    load_annotations_tsv,
    load_dictionary,
    load_trap_words,
    majority_vote,
    parse_category,
    parse_llm_reply,
    save_annotations_tsv,
    trap_filter,
)

HOMOSEXUAL_REPLY = (
    "Sexual orientation | 100 | Homosexual refers to a person's sexual orientation, "
    "specifically indicating attraction to people of the same sex. It falls under the "
    "protected category of sexual orientation."
)
HEADSCARF_REPLY = (
    "Religion and belief | 90 | The word `headscarf' is commonly associated with religious "
    "beliefs, particularly in Islam, where it is worn by women as a symbol of modesty and "
    "religious observance."
)


class TestDictionaryBackend:
    def test_hit_and_miss(self):
        annotations = identify_dictionary(["woman", "table"], {"woman": ProtectedCategory.SEX})
        assert annotations[0].category is ProtectedCategory.SEX
        assert annotations[0].reliability == 100
        assert annotations[0].source == "dictionary"
        assert annotations[1].category is None

    def test_empty_dictionary(self):
        annotations = identify_dictionary(["a", "b"], {})
        assert all(a.category is None for a in annotations)

    def test_case_insensitive(self):
        annotations = identify_dictionary(["Woman"], {"woman": ProtectedCategory.SEX})
        assert annotations[0].category is ProtectedCategory.SEX

    def test_pure_function_of_inputs(self):
        words = ["gay", "desk"]
        table = {"gay": ProtectedCategory.SEXUAL_ORIENTATION}
        assert identify_dictionary(words, table) == identify_dictionary(words, table)

    def test_bundled_dictionary_loads(self):
        table = load_dictionary()
        assert table["homosexual"] is ProtectedCategory.SEXUAL_ORIENTATION
        assert len(table) >= 51


class TestParseReply:
    def test_homosexual_reply(self):
        category, score, explanation = parse_llm_reply(HOMOSEXUAL_REPLY)
        assert category is ProtectedCategory.SEXUAL_ORIENTATION
        assert score == 100
        assert explanation.startswith("Homosexual refers")

    def test_headscarf_reply(self):
        category, score, _ = parse_llm_reply(HEADSCARF_REPLY)
        assert category is ProtectedCategory.RELIGION_BELIEF
        assert score == 90

    def test_none_category(self):
        assert parse_llm_reply("None|95|does not fit") == (None, 95, "does not fit")

    def test_three_pipes_rejected(self):
        with pytest.raises(ValueError, match=r"\|"):
            parse_llm_reply("Race|Race|50|x")

    def test_unknown_category(self):
        with pytest.raises(ValueError, match="unknown protected category"):
            parse_llm_reply("Species|50|nope")

    def test_score_out_of_range(self):
        with pytest.raises(ValueError, match=r"\[0, 100\]"):
            parse_llm_reply("Race|101|x")

    def test_non_integer_score(self):
        with pytest.raises(ValueError, match="integer"):
            parse_llm_reply("Race|ninety|x")

    def test_round_trips_paper_replies_verbatim(self):
        for reply in (HOMOSEXUAL_REPLY, HEADSCARF_REPLY):
            assert format_llm_reply(*parse_llm_reply(reply)) == reply

    @given(
        st.sampled_from([None] + list(ProtectedCategory)),
        st.integers(min_value=0, max_value=100),
        st.text(alphabet=st.characters(blacklist_characters="|\n", min_codepoint=32), max_size=60).map(str.strip),
    )
    def test_parse_inverts_format(self, category, score, explanation):
        assert parse_llm_reply(format_llm_reply(category, score, explanation)) == (
            category,
            score,
            explanation,
        )

    def test_aliases(self):
        assert parse_category("religion or belief") is ProtectedCategory.RELIGION_BELIEF
        assert parse_category("SEXUAL_ORIENTATION") is ProtectedCategory.SEXUAL_ORIENTATION
        assert parse_category("None of the above") is None


class TestLlmBackend:
    def test_canned_annotations(self, stub_llm):
        replies = {"homosexual": HOMOSEXUAL_REPLY, "headscarf": HEADSCARF_REPLY,
                   "table": "None|95|common noun"}
        with stub_llm(lambda w: replies[w]) as server:
            config = LlmConfig(endpoint=server.endpoint, max_retries=0)
            annotations = identify_llm(["homosexual", "headscarf", "table"], config)
        assert [a.word for a in annotations] == ["homosexual", "headscarf", "table"]
        assert annotations[0].category is ProtectedCategory.SEXUAL_ORIENTATION
        assert annotations[0].reliability == 100
        assert annotations[1].category is ProtectedCategory.RELIGION_BELIEF
        assert annotations[1].reliability == 90
        assert annotations[2].category is None
        assert annotations[2].reliability == 95
        assert all(a.source == "llm" for a in annotations)

    def test_malformed_reply_retried_then_fails(self, stub_llm):
        with stub_llm(lambda w: "gibberish with no pipes") as server:
            config = LlmConfig(endpoint=server.endpoint, max_retries=2)
            (annotation,) = identify_llm(["word"], config)
            assert server.requests_seen == 3
        assert annotation.category is None
        assert annotation_failed(annotation)

    def test_transport_error_retried_with_recovery(self, stub_llm):
        with stub_llm(lambda w: "Race | 80 | recovered", fail_first=1) as server:
            config = LlmConfig(endpoint=server.endpoint, max_retries=2)
            (annotation,) = identify_llm(["word"], config)
        assert annotation.category is ProtectedCategory.RACE
        assert not annotation_failed(annotation)

    def test_unreachable_endpoint_yields_failures(self):
        config = LlmConfig(endpoint="http://127.0.0.1:9/none", max_retries=0, timeout=0.5)
        annotations = identify_llm(["a", "b"], config)
        assert all(annotation_failed(a) for a in annotations)
        assert all(a.category is None for a in annotations)

    def test_batched_conversation(self, stub_llm):
        with stub_llm(lambda w: f"None|50|{w}") as server:
            config = LlmConfig(endpoint=server.endpoint, batch_size=3, concurrency=1)
            annotations = identify_llm(["a", "b", "c"], config)
        assert [a.explanation for a in annotations] == ["a", "b", "c"]

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LlmConfig(endpoint="x", temperature=-0.1)
        with pytest.raises(ValueError):
            LlmConfig(endpoint="x", max_retries=-1)


class TestTrapFilter:
    TRAPS = [TrapItem("friendly", TrapBand.LOW), TrapItem("asshole", TrapBand.HIGH)]

    def test_in_band_reliable(self):
        result = trap_filter([("friendly", 1), ("asshole", 5)], self.TRAPS)
        assert result.reliable

    def test_low_band_violation(self):
        result = trap_filter([("friendly", 4), ("asshole", 5)], self.TRAPS)
        assert not result.reliable
        assert result.violations == ("friendly",)

    def test_middle_answer_in_neither_band(self):
        assert not trap_filter([("friendly", 2), ("asshole", 3)], self.TRAPS).reliable

    def test_missing_trap_response(self):
        with pytest.raises(ValueError, match="no response"):
            trap_filter([("friendly", 1)], self.TRAPS)

    def test_likert_range_checked(self):
        with pytest.raises(ValueError, match="1..5"):
            trap_filter([("friendly", 6), ("asshole", 5)], self.TRAPS)

    def test_exhaustive_over_bundled_fixture(self):
        traps = load_trap_words()
        assert len(traps) == 15
        low = {t.word for t in traps if t.expected_band is TrapBand.LOW}
        high = {t.word for t in traps if t.expected_band is TrapBand.HIGH}
        assert high == {"asshole", "dickhead", "motherfucker"}
        assert low == {
            "beautiful", "good", "trustful", "love", "great", "curiosity",
            "generous", "friendly", "sweet", "happy", "helpful", "loyal",
        }
        in_band = {t.word: (1 if t.expected_band is TrapBand.LOW else 5) for t in traps}
        # every single-trap deviation flips the decision exactly when out of band
        for trap in traps:
            for answer in (1, 2, 3, 4, 5):
                session = [(w, v) for w, v in in_band.items() if w != trap.word]
                session.append((trap.word, answer))
                expected_ok = answer in ((1, 2) if trap.expected_band is TrapBand.LOW else (4, 5))
                assert trap_filter(session, traps).reliable is expected_ok

    def test_accepts_iff_every_trap_in_band(self):
        traps = load_trap_words()[:4]
        for answers in itertools.product((1, 3, 5), repeat=4):
            session = list(zip([t.word for t in traps], answers))
            expected = all(
                a in ((1, 2) if t.expected_band is TrapBand.LOW else (4, 5))
                for t, a in zip(traps, answers)
            )
            assert trap_filter(session, traps).reliable is expected


class TestMajorityVote:
    def vote(self, **votes):
        return majority_vote(VoteSheet(word="w", votes=votes))

    def test_category_votes_exceed_none(self):
        annotation = self.vote(race=3, none_of_the_above=2)
        assert annotation.category is ProtectedCategory.RACE
        assert annotation.reliability == 60
        assert annotation.source == "human"

    def test_all_none(self):
        annotation = self.vote(none_of_the_above=5)
        assert annotation.category is None
        assert annotation.reliability == 100

    def test_strict_exceed_tie_is_none(self):
        assert self.vote(race=2, sex=1, none_of_the_above=3).category is None

    def test_plurality_tie_breaks_lexicographically_and_flags(self):
        annotation = self.vote(race=2, age=2, none_of_the_above=1)
        assert annotation.category is ProtectedCategory.AGE
        assert "tie" in annotation.explanation

    def test_scaling_invariance(self):
        a = self.vote(sex=2, none_of_the_above=1)
        b = self.vote(sex=6, none_of_the_above=3)
        assert a.category is b.category
        assert a.reliability == b.reliability

    def test_empty_sheet_rejected(self):
        with pytest.raises(ValueError, match="at least one vote"):
            VoteSheet(word="w", votes={})

    def test_unknown_bucket_rejected(self):
        with pytest.raises(ValueError, match="bucket"):
            VoteSheet(word="w", votes={"species": 1})

    def test_exhaustive_small_sheets_match_rule(self):
        buckets = [c.value for c in ProtectedCategory] + [NONE_OF_THE_ABOVE]
        # all distributions of up to 4 votes over 10 buckets
        for total in range(1, 5):
            for filled in itertools.combinations_with_replacement(range(10), total):
                votes: dict[str, int] = {}
                for idx in filled:
                    votes[buckets[idx]] = votes.get(buckets[idx], 0) + 1
                annotation = majority_vote(VoteSheet(word="w", votes=votes))
                none_votes = votes.get(NONE_OF_THE_ABOVE, 0)
                category_votes = total - none_votes
                assert annotation.is_protected == (category_votes > none_votes)


class TestCohenKappa:
    def test_identical_with_both_labels(self):
        a = {"w1": True, "w2": False, "w3": True}
        assert cohen_kappa(a, dict(a)) == 1.0

    def test_chance_level_is_zero(self):
        a = {"w1": True, "w2": True, "w3": False, "w4": False}
        b = {"w1": True, "w2": False, "w3": True, "w4": False}
        assert cohen_kappa(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_hand_computed_table(self):
        # yes/yes=4, yes/no=1, no/yes=1, no/no=4 -> p_o=0.8, p_e=0.5, kappa=0.6
        a = {}
        b = {}
        for i in range(4):
            a[f"yy{i}"], b[f"yy{i}"] = True, True
            a[f"nn{i}"], b[f"nn{i}"] = False, False
        a["yn"], b["yn"] = True, False
        a["ny"], b["ny"] = False, True
        assert cohen_kappa(a, b) == pytest.approx(0.6, abs=1e-9)

    def test_symmetric(self):
        a = {"w1": True, "w2": False, "w3": False}
        b = {"w1": False, "w2": False, "w3": True}
        assert cohen_kappa(a, b) == cohen_kappa(b, a)

    def test_both_constant_identical_defined_as_one(self):
        a = {"w1": True, "w2": True}
        assert cohen_kappa(a, dict(a)) == 1.0

    def test_negative_kappa_possible(self):
        a = {"w1": True, "w2": False}
        b = {"w1": False, "w2": True}
        assert cohen_kappa(a, b) < 0

    def test_word_set_mismatch(self):
        with pytest.raises(ValueError, match="word sets"):
            cohen_kappa({"w1": True, "w2": True}, {"w1": True, "w3": False})

    def test_too_few_words(self):
        with pytest.raises(ValueError, match="at least 2"):
            cohen_kappa({"w1": True}, {"w1": True})

    def test_per_category_variant(self):
        annotations_a = [
            Annotation("gay", ProtectedCategory.SEXUAL_ORIENTATION, 100, source="expert"),
            Annotation("desk", None, 0, source="expert"),
        ]
        annotations_b = [
            Annotation("gay", ProtectedCategory.SEXUAL_ORIENTATION, 90, source="llm"),
            Annotation("desk", None, 0, source="llm"),
        ]
        per_cat = cohen_kappa_per_category(annotations_a, annotations_b)
        assert per_cat[ProtectedCategory.SEXUAL_ORIENTATION] == 1.0


class TestAnnotationIO:
    def test_tsv_round_trip(self, tmp_path):
        annotations = [
            Annotation("gay", ProtectedCategory.SEXUAL_ORIENTATION, 100, source="llm"),
            Annotation("desk", None, 0, source="dictionary"),
        ]
        path = tmp_path / "ann.tsv"
        save_annotations_tsv(annotations, path)
        loaded = load_annotations_tsv(path)
        assert [(a.word, a.category, a.reliability, a.source) for a in loaded] == [
            (a.word, a.category, a.reliability, a.source) for a in annotations
        ]

    def test_reliability_bounds(self):
        with pytest.raises(ValueError, match="reliability"):
            Annotation("w", None, 101)

    def test_options_list_fixed_order(self):
        assert ANNOTATION_OPTIONS[0] == "Age"
        assert ANNOTATION_OPTIONS[-1] == "None of the above"
        assert len(ANNOTATION_OPTIONS) == 10
