"""LDA（崩壊型ギブスサンプリング）のテスト（pytest不要）

実行:
    python -m scripts.test_topics
"""
from __future__ import annotations

import random
import sys
import time
from datetime import date, datetime, timezone

import numpy as np

from scripts._testkit import close, run_tests, tempdir

from src.aggregate import DailySentiment
from src.corpus import DayBucket, Document, Source
from src.errors import DataError
from src.synthetic import CALM_THEME, CRISIS_THEME
from src.topics import (
    LdaModel,
    analyze,
    build_vocab,
    day_feature_vector,
    gibbs_train,
    infer_theta,
    load_model,
    load_stopwords,
    perplexity,
    save_model,
    top_words,
    topics_report,
    with_sentiment,
)

TS = datetime(2019, 7, 1, 12, 0, tzinfo=timezone.utc)


def _doc(doc_id: str, text: str) -> Document:
    return Document(id=doc_id, ts=TS, text=text, source=Source.HEADLINE)


def _planted_corpus(seed: int, n_docs: int = 40, length: int = 20, prefix: str = "d") -> list[Document]:
    """各文書が片方の語群だけから成るコーパス"""
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        block = CALM_THEME if i % 2 == 0 else CRISIS_THEME
        docs.append(_doc(f"{prefix}{i:03d}", " ".join(rng.choice(block) for _ in range(length))))
    return docs


def _train_planted(seed: int, iterations: int = 60, **kwargs) -> LdaModel:
    docs = _planted_corpus(seed)
    vocab = build_vocab(docs, min_df=1, max_df_fraction=1.0)
    return gibbs_train(docs, vocab, n_topics=2, alpha=0.1, iterations=iterations, seed=seed, **kwargs)


# ----------------------------------------------------------------------
# 語彙
# ----------------------------------------------------------------------

def test_analyze_lowercases_and_drops_short_tokens():
    assert analyze("Oil-price SLUMP: a 5% drop, $BP") == ["oil", "price", "slump", "drop", "bp"]


def test_vocab_document_frequency_filters():
    docs = [
        _doc("a", "oil oil price the"),
        _doc("b", "oil price rally the"),
        _doc("c", "oil bank the"),
        _doc("d", "oil bank merger the"),
    ]
    vocab = build_vocab(docs, stopwords=frozenset({"the"}), min_df=2, max_df_fraction=0.75)
    # oil は 4/4 > 0.75 で除外、rally と merger は 1 件
    assert vocab.tokens == ["bank", "price"]
    assert vocab.doc_freq == [2, 2]
    assert vocab.encode("Bank price bank oil") == [0, 1, 0]


def test_vocab_empty_is_error():
    for docs in ([], [_doc("a", "the and of")]):
        try:
            build_vocab(docs, stopwords=load_stopwords(), min_df=1, max_df_fraction=1.0)
        except DataError:
            continue
        raise AssertionError("DataError が送出されませんでした")


def test_fewer_words_than_topics_is_error():
    docs = [_doc("a", "oil price"), _doc("b", "oil price")]
    vocab = build_vocab(docs, min_df=1, max_df_fraction=1.0)
    try:
        gibbs_train(docs, vocab, n_topics=3, iterations=2)
    except DataError as e:
        assert "V=2" in str(e)
    else:
        raise AssertionError("DataError が送出されませんでした")


# ----------------------------------------------------------------------
# 学習
# ----------------------------------------------------------------------

def test_planted_topics_are_recovered():
    # 100 + 100 文書、K=2、α は既定の 50/K、500 スイープ
    blocks = sorted([sorted(CALM_THEME), sorted(CRISIS_THEME)])
    recovered = 0
    started = time.perf_counter()
    for seed in range(5):
        docs = _planted_corpus(seed, n_docs=200)
        vocab = build_vocab(docs, min_df=1, max_df_fraction=1.0)
        model = gibbs_train(docs, vocab, n_topics=2, iterations=500, seed=seed)
        assert model.alpha == 25.0
        tops = [sorted(w for w, _ in top_words(model, k, 10)) for k in range(2)]
        if sorted(tops) == blocks:
            recovered += 1
    elapsed = time.perf_counter() - started
    assert recovered >= 4, recovered
    assert elapsed < 60.0, elapsed


def test_counts_are_conserved_every_sweep():
    seen = []

    def check_counts(sweep, n_dk, n_k, doc_len):
        assert np.all(n_dk >= 0) and np.all(n_k >= 0)
        assert np.array_equal(n_dk.sum(axis=1), doc_len)
        assert int(n_k.sum()) == int(doc_len.sum())
        seen.append(sweep)

    model = _train_planted(1, iterations=5, on_sweep=check_counts)
    assert seen == [1, 2, 3, 4, 5]
    assert int(model.topic_word_counts.sum()) == 40 * 20


def test_phi_rows_sum_to_one():
    model = _train_planted(2, iterations=10)
    assert np.allclose(model.phi.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(model.phi > 0)


def test_same_seed_is_bitwise_reproducible():
    a = _train_planted(3, iterations=10)
    b = _train_planted(3, iterations=10)
    assert np.array_equal(a.topic_word_counts, b.topic_word_counts)


def test_document_order_does_not_matter():
    docs = _planted_corpus(4)
    vocab = build_vocab(docs, min_df=1, max_df_fraction=1.0)
    shuffled = docs[:]
    random.Random(0).shuffle(shuffled)
    a = gibbs_train(docs, vocab, n_topics=2, alpha=0.1, iterations=5, seed=9)
    b = gibbs_train(shuffled, vocab, n_topics=2, alpha=0.1, iterations=5, seed=9)
    assert np.array_equal(a.topic_word_counts, b.topic_word_counts)


def test_single_topic_phi_is_smoothed_unigram():
    docs = _planted_corpus(5, n_docs=8)
    vocab = build_vocab(docs, min_df=1, max_df_fraction=1.0)
    model = gibbs_train(docs, vocab, n_topics=1, iterations=3, seed=5)
    counts = np.zeros(len(vocab))
    for doc in docs:
        for w in vocab.encode(doc.text):
            counts[w] += 1
    expected = (counts + model.beta) / (counts.sum() + len(vocab) * model.beta)
    assert np.allclose(model.phi[0], expected, rtol=0, atol=1e-15)


def test_default_alpha_is_50_over_k():
    docs = _planted_corpus(0, n_docs=6)
    vocab = build_vocab(docs, min_df=1, max_df_fraction=1.0)
    model = gibbs_train(docs, vocab, n_topics=4, iterations=1)
    assert model.alpha == 12.5


def test_perplexity_improves_on_uniform():
    held_out = _planted_corpus(99, n_docs=10, prefix="h")
    model = _train_planted(0, checkpoint_every=20, held_out=held_out)
    assert [s for s, _ in model.checkpoints] == [1, 20, 40, 60]
    uniform = LdaModel(model.vocab, 2, 0.1, model.beta, np.zeros_like(model.topic_word_counts), 0, 0)
    # 一様な φ のパープレキシティは語彙数
    assert close(perplexity(uniform, held_out), float(len(model.vocab)), 1e-9)
    assert model.checkpoints[-1][1] < len(model.vocab)


def test_perplexity_does_not_increase_over_checkpoints():
    held_out = _planted_corpus(99, n_docs=10, prefix="h")
    monotone = 0
    for seed in range(5):
        model = _train_planted(seed, checkpoint_every=20, held_out=held_out)
        values = [ppl for _, ppl in model.checkpoints]
        assert len(values) == 4
        if all(b <= a for a, b in zip(values, values[1:])):
            monotone += 1
    assert monotone >= 4, monotone


# ----------------------------------------------------------------------
# 推論と特徴量
# ----------------------------------------------------------------------

def test_inferred_theta_is_a_distribution():
    model = _train_planted(0)
    for doc in _planted_corpus(7, n_docs=6, prefix="n"):
        theta = infer_theta(model, doc, burn_in=10, samples=5).theta
        assert close(float(theta.sum()), 1.0, 1e-12)
        assert np.all(theta > 0)


def test_inferred_theta_follows_the_block():
    model = _train_planted(0)
    calm = infer_theta(model, _doc("x", " ".join(CALM_THEME * 2)), burn_in=10, samples=5).theta
    crisis = infer_theta(model, _doc("y", " ".join(CRISIS_THEME * 2)), burn_in=10, samples=5).theta
    assert int(np.argmax(calm)) != int(np.argmax(crisis))


def test_out_of_vocabulary_doc_is_uniform():
    model = _train_planted(0, iterations=5)
    theta = infer_theta(model, _doc("z", "zebra xylophone")).theta
    assert theta.tolist() == [0.5, 0.5]


def test_day_feature_vector_modes():
    model = _train_planted(0)
    day = date(2019, 7, 1)
    bucket = DayBucket(trading_day=day, documents=[_doc("p", " ".join(CALM_THEME)), _doc("q", " ".join(CALM_THEME))])
    dist = day_feature_vector(model, bucket, "distribution", burn_in=10, samples=5)
    assert close(float(dist.features.sum()), 1.0, 1e-12)
    count = day_feature_vector(model, bucket, "count", burn_in=10, samples=5)
    assert sorted(count.features.tolist()) == [0.0, 2.0]

    empty = DayBucket(trading_day=day)
    assert day_feature_vector(model, empty, "distribution").features.tolist() == [0.5, 0.5]
    assert day_feature_vector(model, empty, "count").features.tolist() == [0.0, 0.0]


def test_with_sentiment_appends_five_values():
    fv = day_feature_vector(_train_planted(0, iterations=2), DayBucket(trading_day=date(2019, 7, 1)))
    daily = DailySentiment(trading_day=date(2019, 7, 1), mean_neg=0.1, mean_neu=0.7, mean_pos=0.2, mean_compound=0.3, sentd=0.25)
    out = with_sentiment(fv, daily)
    assert out.features.tolist() == [0.5, 0.5, 0.1, 0.7, 0.2, 0.3, 0.25]


def test_topics_report_layout():
    report = topics_report(_train_planted(0, iterations=5), m=3)
    assert [t["topic_id"] for t in report] == [0, 1]
    assert all(len(t["top_words"]) == 3 for t in report)


def test_top_words_truncates_and_breaks_ties_by_token():
    docs = [_doc("a", "delta alpha charlie bravo"), _doc("b", "echo delta")]
    vocab = build_vocab(docs, min_df=1, max_df_fraction=1.0)
    assert vocab.tokens == ["alpha", "bravo", "charlie", "delta", "echo"]
    counts = np.zeros((2, 5), dtype=np.int64)
    counts[0] = [3, 3, 5, 0, 3]
    model = LdaModel(vocab, 2, 0.1, 0.01, counts, 0, 0)
    ranked = top_words(model, 0, 50)
    assert [tok for tok, _ in ranked] == ["charlie", "alpha", "bravo", "echo", "delta"]
    # 全て同値なら辞書順
    assert [tok for tok, _ in top_words(model, 1, 50)] == vocab.tokens
    assert len(top_words(model, 0, 3)) == 3


# ----------------------------------------------------------------------
# 保存
# ----------------------------------------------------------------------

def test_save_and_load():
    model = _train_planted(5, iterations=10)
    with tempdir() as d:
        path = save_model(d / "lda.json", model, config_hash="abc")
        loaded = load_model(path)
    assert np.array_equal(loaded.topic_word_counts, model.topic_word_counts)
    assert loaded.vocab.tokens == model.vocab.tokens
    assert (loaded.alpha, loaded.beta, loaded.seed) == (model.alpha, model.beta, model.seed)
    assert top_words(loaded, 0) == top_words(model, 0)


def test_load_rejects_other_files():
    with tempdir() as d:
        path = d / "x.json"
        path.write_text('{"format": "something-else"}', encoding="utf-8")
        try:
            load_model(path)
        except DataError:
            pass
        else:
            raise AssertionError("DataError が送出されませんでした")


if __name__ == "__main__":
    sys.exit(run_tests(globals(), "topics"))
