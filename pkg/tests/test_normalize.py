from __future__ import annotations

import itertools

import pytest

from helpers_text import random_text, surface_pool
from senlex.normalize import (
    DictionaryKind,
    NormalizerResources,
    ReplacementDictionary,
    SegmentationLexicon,
    StopwordSet,
    TechniqueSet,
    TextNormalizer,
    apply_teencode_stopwords,
    correct_misspellings,
    emoticons_to_emoji,
    load_replacements,
    remove_stopword_tokens,
    run_pipeline,
    segment_words,
    standardize_words,
)
from senlex.randomness import derive_rng

SLIGHTLY_SMILING = "\U0001F642"


@pytest.fixture(scope="module")
def res() -> NormalizerResources:
    return NormalizerResources.default()


# ---------------------------------------------------------------------------
# TechniqueSet
# ---------------------------------------------------------------------------

def test_technique_set_parses_combination_strings():
    assert TechniqueSet.from_string("1+2+3").enabled == frozenset({1, 2, 3})
    assert TechniqueSet.from_string("5+1").enabled == frozenset({1, 5})
    assert TechniqueSet.from_string("").enabled == frozenset()
    assert TechniqueSet.from_string("original").enabled == frozenset()
    assert str(TechniqueSet.from_string("3+2+1")) == "1+2+3"
    assert str(TechniqueSet()) == "original"


def test_technique_set_iterates_ascending_regardless_of_declaration():
    assert list(TechniqueSet([4, 1, 3])) == [1, 3, 4]
    assert list(TechniqueSet.from_string("5+2")) == [2, 5]


def test_technique_set_rejects_unknown_indices():
    with pytest.raises(ValueError):
        TechniqueSet([0])
    with pytest.raises(ValueError):
        TechniqueSet.from_string("1+6")
    with pytest.raises(ValueError):
        TechniqueSet.from_string("one")


# ---------------------------------------------------------------------------
# ReplacementDictionary
# ---------------------------------------------------------------------------

def test_dictionary_rejects_canonical_that_is_a_surface():
    with pytest.raises(ValueError):
        ReplacementDictionary({"a": "b", "b": "c"}, DictionaryKind.TEENCODE)


def test_dictionary_rejects_surface_inside_multiword_canonical():
    with pytest.raises(ValueError):
        ReplacementDictionary(
            {"ng": "người", "ngta": "người ta", "người": "x"},
            DictionaryKind.TEENCODE,
        )


def test_emoticon_dictionary_rejects_surface_substring_of_canonical():
    with pytest.raises(ValueError):
        ReplacementDictionary({":)": ":)x"}, DictionaryKind.EMOTICON)


def test_dictionary_rejects_empty_forms():
    with pytest.raises(ValueError):
        ReplacementDictionary({"": "x"}, DictionaryKind.MISSPELLING)


def test_load_replacements_rejects_malformed_line(tmp_path):
    bad = tmp_path / "bad.tsv"
    bad.write_text("onlyonecolumn\n", encoding="utf-8")
    with pytest.raises(ValueError, match="bad.tsv:1"):
        load_replacements(bad, DictionaryKind.TEENCODE)


def test_load_replacements_missing_file():
    with pytest.raises(FileNotFoundError):
        load_replacements("/nonexistent/dict.tsv", DictionaryKind.TEENCODE)


# ---------------------------------------------------------------------------
# Technique 1: word standardization
# ---------------------------------------------------------------------------

def test_standardize_paper_examples(res):
    vocab = res.misspellings.canonical_vocab
    assert standardize_words("ủaaa", vocab) == "ủa"
    assert standardize_words("tuỳ", vocab) == "tùy"
    assert standardize_words("abc", vocab) == "abc"


def test_standardize_is_total_on_odd_input(res):
    vocab = res.misspellings.canonical_vocab
    for text in ["", " ", "123", "🙂🙂🙂", "\t\n", "a", "!!!!"]:
        standardize_words(text, vocab)


def test_tone_repositioning_table():
    # Classic "old style" -> "new style" placements plus onset absorption.
    cases = [
        ("tuỳ", "tùy"),
        ("hoà", "hòa"),
        ("hoá", "hóa"),
        ("hoả", "hỏa"),
        ("qúy", "quý"),
        ("qùa", "quà"),
        ("thuỷ", "thủy"),
        ("khoẻ", "khỏe"),
        ("uỷ", "ủy"),
        ("oà", "òa"),
        ("loà", "lòa"),
        ("toà", "tòa"),
        # privileged vowels keep or attract the mark
        ("trépubl", "trépubl"),
        ("thơù", "thờu"),
        ("quēằ", "quēằ"),  # multiple odd marks: unchanged
        # coda present: second vowel of the group carries the mark
        ("tóan", "toán"),
        ("núơc", "nuớc"),
        ("tuỳên", "tuyền"),
        # three-vowel groups, no coda: middle vowel
        ("khúyu", "khuýu"),
        ("khuỷu", "khuỷu"),
        # already standard: fixed points
        ("tùy", "tùy"),
        ("toán", "toán"),
        ("quý", "quý"),
        ("người", "người"),
        ("tiếng", "tiếng"),
        ("việt", "việt"),
        ("không", "không"),
        # not Vietnamese-shaped: untouched
        ("abc", "abc"),
        ("xyz", "xyz"),
    ]
    for raw, expected in cases:
        assert standardize_words(raw) == expected, (raw, expected)


def test_squeeze_runs_of_three_or_more():
    assert standardize_words("đẹppppp") == "đẹp"
    assert standardize_words("hayyy") == "hay"
    assert standardize_words(":))))") == ":)"
    assert standardize_words("!!!!") == "!"
    # digits and emoji are exempt
    assert standardize_words("1000") == "1000"
    assert standardize_words("🙂🙂🙂") == "🙂🙂🙂"


def test_trailing_double_vowel_resolved_by_vocabulary(res):
    vocab = res.misspellings.canonical_vocab
    assert "vui" in vocab and "quá" in vocab
    assert standardize_words("vuii", vocab) == "vui"
    assert standardize_words("quáá", vocab) == "quá"
    # unknown squeezed form: the double stays
    assert standardize_words("xoo", vocab) == "xoo"
    # without a vocabulary nothing is squeezed at run length 2
    assert standardize_words("vuii") == "vuii"


# ---------------------------------------------------------------------------
# Technique 2: emoticons -> emoji
# ---------------------------------------------------------------------------

def test_emoticon_paper_examples(res):
    assert emoticons_to_emoji(":)))", res.emoticons) == SLIGHTLY_SMILING
    assert emoticons_to_emoji("=))", res.emoticons) == SLIGHTLY_SMILING
    assert emoticons_to_emoji("vui :)", res.emoticons) == "vui " + SLIGHTLY_SMILING


def test_emoticon_longest_surface_wins(res):
    assert emoticons_to_emoji(":((", res.emoticons) == "🙁"
    assert emoticons_to_emoji(":(", res.emoticons) == "🙁"


def test_emoticon_no_match_identity(res):
    assert emoticons_to_emoji("hôm nay trời đẹp", res.emoticons) == "hôm nay trời đẹp"


def test_emoticon_word_boundary_guards(res):
    # letter- and digit-edged surfaces must not fire inside words or numbers
    assert emoticons_to_emoji("xDương", res.emoticons) == "xDương"
    assert emoticons_to_emoji("10:00", res.emoticons) == "10:00"
    assert emoticons_to_emoji("<30", res.emoticons) == "<30"
    assert emoticons_to_emoji("xD", res.emoticons) == "😆"


# ---------------------------------------------------------------------------
# Technique 3: misspellings
# ---------------------------------------------------------------------------

def test_misspelling_paper_example(res):
    assert correct_misspellings("qúy hóa quá", res.misspellings) == "quý hóa quá"


def test_misspelling_manual_replacement_oracle(res):
    # five planted misspellings; expected string built by hand
    raw = "sử lý khong tốt nên bổ xung thêm , nghành này cần sv giỏi"
    expected = "xử lý không tốt nên bổ sung thêm , ngành này cần sinh viên giỏi"
    assert correct_misspellings(raw, res.misspellings) == expected


def test_misspelling_longest_surface_wins():
    d = ReplacementDictionary(
        {"sát": "giết", "sát nhập": "sáp nhập"},
        DictionaryKind.MISSPELLING,
    )
    assert correct_misspellings("sát nhập công ty", d) == "sáp nhập công ty"
    assert correct_misspellings("kẻ sát nhân", d) == "kẻ giết nhân"


def test_misspelling_unknown_tokens_unchanged(res):
    assert correct_misspellings("hôm nay đi học", res.misspellings) == "hôm nay đi học"


def test_misspelling_preserves_unmatched_whitespace(res):
    assert correct_misspellings("  a   khong  b ", res.misspellings) == "  a   không  b "


# ---------------------------------------------------------------------------
# Technique 4: teencode + stopwords
# ---------------------------------------------------------------------------

def test_teencode_fixture_oracle(res):
    assert apply_teencode_stopwords("ko biết", res.teencode) == "không biết"


def test_teencode_expansion_to_phrase(res):
    assert apply_teencode_stopwords("ntn đây", res.teencode) == "như thế nào đây"


def test_stopword_only_text_removed_to_empty(res):
    out = apply_teencode_stopwords(
        "thì là mà", res.teencode, res.stopwords, remove_stopwords=True
    )
    assert out == ""


def test_stopwords_preserved_when_flag_off(res):
    out = apply_teencode_stopwords("thì là mà", res.teencode, res.stopwords)
    assert out == "thì là mà"


def test_stopword_removal_is_case_insensitive(res):
    out = remove_stopword_tokens("Thì buồn", res.stopwords)
    assert out == "buồn"


def test_stopword_removal_requires_set(res):
    with pytest.raises(ValueError):
        apply_teencode_stopwords("a", res.teencode, None, remove_stopwords=True)


def test_teencode_then_stopword_interaction(res):
    # "vs" expands to the stopword "với", which removal then drops
    out = apply_teencode_stopwords(
        "đi vs bạn", res.teencode, res.stopwords, remove_stopwords=True
    )
    assert out == "đi bạn"


# ---------------------------------------------------------------------------
# Technique 5: segmentation
# ---------------------------------------------------------------------------

def test_segmentation_fixture_oracle():
    lex = SegmentationLexicon(["sức_khỏe"])
    assert segment_words("sức khỏe tốt", lex) == "sức_khỏe tốt"


def test_segmentation_single_syllable_unchanged(res):
    assert segment_words("tốt", res.segmentation) == "tốt"


def _enumerate_segmentations(tokens: tuple[str, ...], lex: SegmentationLexicon):
    """All partitions into contiguous groups where every group of size >= 2
    is a lexicon entry."""
    if not tokens:
        yield ()
        return
    for k in range(1, len(tokens) + 1):
        head = tokens[:k]
        if k > 1 and tuple(t.casefold() for t in head) not in lex.entries:
            continue
        for rest in _enumerate_segmentations(tokens[k:], lex):
            yield (head,) + rest


def test_segmentation_leftmost_longest_against_enumeration():
    # overlapping candidates on a 5-token string
    lex = SegmentationLexicon(["a b", "b c", "a b c", "c d e", "d e"])
    tokens = ("a", "b", "c", "d", "e")
    candidates = list(_enumerate_segmentations(tokens, lex))
    # leftmost-longest: lexicographically greatest sequence of group sizes
    best = max(candidates, key=lambda seg: [len(g) for g in seg])
    expected = " ".join("_".join(g) for g in best)
    assert expected == "a_b_c d_e"
    assert segment_words("a b c d e", lex) == expected


def test_segmentation_random_against_enumeration():
    rng = derive_rng(20260816, "segmentation-enum")
    alphabet = ["a", "b", "c", "d"]
    for _ in range(200):
        n_entries = int(rng.integers(1, 6))
        entries = []
        for _ in range(n_entries):
            k = int(rng.integers(2, 4))
            entries.append(" ".join(alphabet[rng.integers(len(alphabet))] for _ in range(k)))
        lex = SegmentationLexicon(entries)
        tokens = tuple(alphabet[rng.integers(len(alphabet))] for _ in range(5))
        best = max(
            _enumerate_segmentations(tokens, lex),
            key=lambda seg: [len(g) for g in seg],
        )
        expected = " ".join("_".join(g) for g in best)
        assert segment_words(" ".join(tokens), lex) == expected


def test_segmentation_adapter_seam(res):
    calls = []

    def fake_segmenter(text: str) -> str:
        calls.append(text)
        return text.replace("sức khỏe", "sức_khỏe")

    resources = NormalizerResources(segmenter=fake_segmenter)
    out = run_pipeline("sức khỏe", "5", resources)
    assert out == "sức_khỏe"
    assert calls == ["sức khỏe"]


# ---------------------------------------------------------------------------
# Pipeline
# ---------------------------------------------------------------------------

def test_pipeline_empty_technique_set_is_identity(res):
    weird = "  ủaaa :))) ko  j "
    assert run_pipeline(weird, "", res) == weird


def test_pipeline_composed_paper_example(res):
    assert run_pipeline("ủaaa :)))", "1+2", res) == "ủa " + SLIGHTLY_SMILING


def test_pipeline_missing_resource_is_config_error(res):
    with pytest.raises(ValueError, match="technique 2"):
        run_pipeline("x", "1+2", NormalizerResources())
    with pytest.raises(ValueError, match="technique 5"):
        run_pipeline("x", "5", NormalizerResources())


def test_pipeline_declaration_order_irrelevant(res):
    text = "ko bik sức khỏe ntn :))"
    a = run_pipeline(text, TechniqueSet([1, 2, 3, 4, 5]), res)
    b = run_pipeline(text, TechniqueSet([5, 3, 1, 4, 2]), res)
    assert a == b


def test_pipeline_idempotent_on_random_texts(res):
    rng = derive_rng(20260816, "normalize-idempotence")
    surfaces = surface_pool(res)
    subsets = [
        TechniqueSet(c)
        for r in range(6)
        for c in itertools.combinations([1, 2, 3, 4, 5], r)
    ]
    assert len(subsets) == 32
    for _ in range(300):
        text = random_text(rng, surfaces)
        for ts in subsets:
            once = run_pipeline(text, ts, res)
            twice = run_pipeline(once, ts, res)
            assert twice == once, (text, str(ts), once, twice)


def test_pipeline_idempotent_with_stopword_removal(res):
    rng = derive_rng(20260816, "normalize-idempotence-stop")
    surfaces = surface_pool(res)
    for _ in range(200):
        text = random_text(rng, surfaces)
        once = run_pipeline(text, "1+2+3+4+5", res, remove_stopwords=True)
        twice = run_pipeline(once, "1+2+3+4+5", res, remove_stopwords=True)
        assert twice == once, (text, once, twice)


def test_outputs_contain_no_dictionary_surface_forms(res):
    # closure property: re-scanning a pass output finds nothing to replace
    rng = derive_rng(20260816, "normalize-closure")
    surfaces = surface_pool(res)
    for _ in range(200):
        text = random_text(rng, surfaces)
        after2 = emoticons_to_emoji(text, res.emoticons)
        assert emoticons_to_emoji(after2, res.emoticons) == after2
        after3 = correct_misspellings(text, res.misspellings)
        assert correct_misspellings(after3, res.misspellings) == after3
        after4 = apply_teencode_stopwords(text, res.teencode)
        assert apply_teencode_stopwords(after4, res.teencode) == after4


def test_non_destructiveness_unmatched_bytes_survive(res):
    # no dictionary surface, no elongation, standard tones: full pipeline is identity
    text = "hôm nay trời đẹp lắm nha mọi ngươi ."
    out = run_pipeline(text, "1+2+3", res)
    assert out == text


def test_default_resources_are_coherent(res):
    # canonical forms must pass untouched through techniques 1-4 (T5 may
    # still join their syllables) and be idempotence-safe for the full run
    for d in (res.misspellings, res.teencode, res.emoticons):
        for canonical in d.entries.values():
            assert run_pipeline(canonical, "1+2+3+4", res) == canonical, canonical
            once = run_pipeline(canonical, "1+2+3+4+5", res)
            assert run_pipeline(once, "1+2+3+4+5", res) == once, canonical


# ---------------------------------------------------------------------------
# TextNormalizer estimator
# ---------------------------------------------------------------------------

def test_text_normalizer_transforms_lists(res):
    tn = TextNormalizer(techniques="1+2", resources=res)
    out = tn.fit().transform(["ủaaa :)))", "tuỳ"])
    assert out == ["ủa " + SLIGHTLY_SMILING, "tùy"]


def test_text_normalizer_rejects_non_list(res):
    tn = TextNormalizer(resources=res)
    with pytest.raises(TypeError):
        tn.transform("a bare string")
    with pytest.raises(TypeError):
        tn.transform([b"bytes"])


def test_text_normalizer_default_resources():
    tn = TextNormalizer(techniques="1")
    assert tn.transform(["tuỳ"]) == ["tùy"]
