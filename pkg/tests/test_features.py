from __future__ import annotations

from collections import Counter

import numpy as np
import pytest

from senlex.features import (
    PAD_INDEX,
    PAD_TOKEN,
    UNK_INDEX,
    UNK_TOKEN,
    EmbeddingMatrix,
    FeatureScaling,
    FusedVector,
    LexiconScaler,
    SequenceEncoder,
    Vocabulary,
    build_vocab,
    decode_sequence,
    encode_sequence,
    fuse_features,
    load_embeddings,
    random_embeddings,
)
from senlex.randomness import derive_rng


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

def test_build_vocab_cutoff_definition():
    vocab = build_vocab([["a", "a", "b"], ["a"]], min_freq=2)
    assert vocab.index == {PAD_TOKEN: 0, UNK_TOKEN: 1, "a": 2}
    vocab1 = build_vocab([["a", "a", "b"], ["a"]], min_freq=1)
    assert vocab1.index["b"] == 3


def test_build_vocab_frequency_then_lexicographic():
    docs = [["c", "c", "b", "b", "a"]]
    vocab = build_vocab(docs, min_freq=1)
    # b and c tie at 2, b < c lexicographically; a trails at frequency 1
    assert vocab.tokens == (PAD_TOKEN, UNK_TOKEN, "b", "c", "a")


def test_build_vocab_counting_oracle():
    rng = derive_rng(20260816, "vocab-oracle")
    alphabet = [f"t{i}" for i in range(30)]
    docs = [
        [alphabet[rng.integers(len(alphabet))] for _ in range(int(rng.integers(1, 20)))]
        for _ in range(50)
    ]
    counts = Counter(tok for doc in docs for tok in doc)
    for min_freq in (1, 2, 3):
        vocab = build_vocab(docs, min_freq)
        expected = sorted(
            (t for t, c in counts.items() if c >= min_freq),
            key=lambda t: (-counts[t], t),
        )
        assert list(vocab.tokens[2:]) == expected


def test_build_vocab_rejects_empty_and_bad_cutoff():
    with pytest.raises(ValueError):
        build_vocab([], min_freq=1)
    with pytest.raises(ValueError):
        build_vocab([["a"]], min_freq=0)


def test_vocab_reserved_slots_never_evicted():
    vocab = build_vocab([[PAD_TOKEN, UNK_TOKEN, "x"]], min_freq=1)
    assert vocab.tokens[:2] == (PAD_TOKEN, UNK_TOKEN)
    assert vocab.lookup("x") == 2
    assert len(vocab) == 3


def test_vocab_save_load_roundtrip(tmp_path):
    vocab = build_vocab([["xin", "chào", "xin"]], min_freq=1)
    f = tmp_path / "vocab.tsv"
    vocab.save(f)
    again = Vocabulary.load(f)
    assert again.tokens == vocab.tokens
    assert again.index == vocab.index


def test_vocab_validates_shape():
    with pytest.raises(ValueError):
        Vocabulary(index={"a": 0}, tokens=("a",))


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------

def _write_vectors(tmp_path, rows, dim):
    f = tmp_path / "vec.txt"
    lines = [f"{len(rows)} {dim}"]
    for tok, vals in rows:
        lines.append(tok + " " + " ".join(str(v) for v in vals))
    f.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return f


def test_load_embeddings_exact_copy(tmp_path):
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "vui", "buồn"])
    f = _write_vectors(tmp_path, [("vui", [1.0, 2.0]), ("buồn", [3.0, -4.0])], 2)
    emb = load_embeddings(f, vocab, seed=0)
    assert emb.dim == 2
    assert list(emb.matrix[vocab.index["vui"]]) == [1.0, 2.0]
    assert list(emb.matrix[vocab.index["buồn"]]) == [3.0, -4.0]
    assert emb.coverage == 1.0


def test_load_embeddings_pad_row_zero_and_oov_seeded(tmp_path):
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "vui", "lạ"])
    f = _write_vectors(tmp_path, [("vui", [1.0, 2.0])], 2)
    a = load_embeddings(f, vocab, seed=9)
    b = load_embeddings(f, vocab, seed=9)
    c = load_embeddings(f, vocab, seed=10)
    assert np.all(a.matrix[PAD_INDEX] == 0.0)
    assert np.array_equal(a.matrix, b.matrix)
    assert not np.array_equal(a.matrix, c.matrix)
    oov = a.matrix[vocab.index["lạ"]]
    bound = 0.25 / np.sqrt(2)
    assert np.all(np.abs(oov) <= bound)


def test_load_embeddings_coverage_fraction(tmp_path):
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "a", "b", "c", "d", "e"])
    f = _write_vectors(tmp_path, [("a", [1]), ("b", [2]), ("c", [3]), ("z", [9])], 1)
    emb = load_embeddings(f, vocab, seed=0)
    assert emb.coverage == pytest.approx(3 / 5)


def test_load_embeddings_dimension_mismatch(tmp_path):
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "a"])
    f = tmp_path / "vec.txt"
    f.write_text("2 3\na 1 2 3\nb 1 2\n", encoding="utf-8")
    with pytest.raises(ValueError, match=":3"):
        load_embeddings(f, vocab, seed=0)


def test_load_embeddings_bad_header(tmp_path):
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN])
    f = tmp_path / "vec.txt"
    f.write_text("not a header\n", encoding="utf-8")
    with pytest.raises(ValueError, match="header"):
        load_embeddings(f, vocab, seed=0)


def test_random_embeddings_seeded_and_padded():
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "x", "y"])
    a = random_embeddings(vocab, 8, seed=3)
    b = random_embeddings(vocab, 8, seed=3)
    assert np.array_equal(a.matrix, b.matrix)
    assert np.all(a.matrix[PAD_INDEX] == 0.0)
    assert a.matrix.shape == (4, 8)


def test_embedding_matrix_invariants():
    with pytest.raises(ValueError, match="PAD"):
        EmbeddingMatrix(matrix=np.ones((2, 2)))
    with pytest.raises(ValueError, match="finite"):
        EmbeddingMatrix(matrix=np.array([[0.0], [np.nan]]))


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def test_encode_pads_to_max_len():
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "a"])
    assert list(encode_sequence(["a"], vocab, 3)) == [2, 0, 0]


def test_encode_truncates_at_max_len():
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "a"])
    out = encode_sequence(["a"] * 120, vocab, 100)
    assert out.shape == (100,)
    assert np.all(out == 2)


def test_encode_oov_to_unk():
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN, "a"])
    assert list(encode_sequence(["zz", "qq"], vocab, 4)) == [1, 1, 0, 0]


def test_encode_decode_stability():
    rng = derive_rng(20260816, "encode-roundtrip")
    words = [f"w{i}" for i in range(40)]
    vocab = build_vocab([words], min_freq=1)
    for _ in range(100):
        n = int(rng.integers(1, 20))
        tokens = [words[rng.integers(len(words))] for _ in range(n)]
        idx = encode_sequence(tokens, vocab, 20)
        assert decode_sequence(idx, vocab) == tokens


def test_encode_rejects_bad_max_len():
    vocab = Vocabulary.from_tokens([PAD_TOKEN, UNK_TOKEN])
    with pytest.raises(ValueError):
        encode_sequence(["a"], vocab, 0)


# ---------------------------------------------------------------------------
# Scaling and fusion
# ---------------------------------------------------------------------------

def test_fuse_none_is_concatenation():
    fused = fuse_features(np.array([1.0, 2, 3, 4]), np.array([0.0, 5.0]), "none")
    assert list(fused.values) == [1, 2, 3, 4, 0, 5]
    assert fused.pooled_dim == 4 and fused.lexicon_dim == 2


def test_fuse_log1p_closed_form():
    fused = fuse_features(np.zeros(1), np.array([0.0, 5.0]), FeatureScaling.LOG1P)
    assert fused.lexicon[0] == 0.0
    assert fused.lexicon[1] == pytest.approx(np.log(6.0))


def test_fuse_zero_lexicon_block_stays_zero():
    for scaling in ("none", "log1p"):
        fused = fuse_features(np.array([7.0]), np.zeros(8), scaling)
        assert np.all(fused.lexicon == 0.0)


def test_fusion_locality_pooled_block_bit_identical():
    pooled = derive_rng(1, "fusion-pooled").normal(size=16)
    a = fuse_features(pooled, np.array([1.0, 2.0]), "log1p")
    b = fuse_features(pooled, np.array([9.0, 0.0]), "log1p")
    assert np.array_equal(a.pooled, b.pooled)
    assert np.array_equal(a.pooled, pooled)


def test_fuse_rejects_negative_counts():
    with pytest.raises(ValueError, match="non-negative"):
        fuse_features(np.zeros(2), np.array([-1.0]), "none")


def test_fuse_minmax_requires_fit():
    with pytest.raises(ValueError, match="fit"):
        fuse_features(np.zeros(2), np.array([1.0]), "minmax")
    scaler = LexiconScaler("minmax").fit(np.array([[0.0, 2.0], [4.0, 2.0]]))
    fused = fuse_features(np.zeros(1), np.array([2.0, 2.0]), "minmax", scaler)
    assert fused.lexicon[0] == pytest.approx(0.5)
    assert fused.lexicon[1] == pytest.approx(0.0)  # constant dimension maps to 0


def test_fuse_scaler_mode_mismatch():
    scaler = LexiconScaler("none")
    with pytest.raises(ValueError, match="different scaling"):
        fuse_features(np.zeros(1), np.ones(1), "log1p", scaler)


def test_fused_vector_shape_validation():
    with pytest.raises(ValueError):
        FusedVector(values=np.zeros(3), pooled_dim=1, lexicon_dim=1)


def test_scaling_coerce():
    assert FeatureScaling.coerce("LOG1P") is FeatureScaling.LOG1P
    with pytest.raises(ValueError, match="unknown scaling"):
        FeatureScaling.coerce("sqrt")


# ---------------------------------------------------------------------------
# SequenceEncoder estimator
# ---------------------------------------------------------------------------

def test_sequence_encoder_end_to_end():
    enc = SequenceEncoder(max_len=5, min_freq=1)
    X = ["vui quá đi", "buồn quá"]
    out = enc.fit(X).transform(X)
    assert out.shape == (2, 5)
    assert out.dtype == np.int64
    assert out[0][3] == PAD_INDEX
    assert enc.vocabulary_.lookup("quá") != UNK_INDEX


def test_sequence_encoder_unfit_transform_fails():
    with pytest.raises(ValueError, match="before fit"):
        SequenceEncoder().transform(["x"])


def test_sequence_encoder_unseen_tokens_unk():
    enc = SequenceEncoder(max_len=3).fit(["a b"])
    out = enc.transform(["c c c"])
    assert np.all(out == UNK_INDEX)
