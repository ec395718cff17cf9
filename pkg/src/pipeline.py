"""パイプラインの各ステージ

score → aggregate → market → correlate / granger → topics-train → topics-infer
→ classify-train → classify-eval

各ステージは入力ファイル（と前段の成果物）から結果を計算して output_dir に書き出す。
成果物の先頭にはステージの設定ハッシュ・seed・ツールのバージョンを埋め込む。
ステージの設定ハッシュはそのステージが依存する設定キーだけから計算するため、
例えば volatility_window を変えても score / aggregate の成果物は変わらない。
"""
from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Callable, Iterator, Optional

from . import classify, report
from .aggregate import DailySentiment, build_daily_series, write_daily_csv
from .config import CORRELATION_LAGS, MARKET_TARGETS, SENTIMENT_DIMS, TOOL_NAME, TOOL_VERSION, TOP_WORDS, RunConfig
from .corpus import (
    DayBucket,
    Document,
    Source,
    TradingCalendar,
    bucket_by_day,
    load_documents,
    load_prices,
)
from .errors import ConfigError, DataError, SenvolError, StageError
from .market import DirectionLabel, MarketSeries, build_market_series, write_market_csv
from .sentiment import Lexicon, RuleConfig, load_lexicon, score_document
from .stats import correlation_grid, granger_grid
from .topics import (
    DayFeatureVector,
    build_vocab,
    day_feature_vector,
    gibbs_train,
    load_model,
    load_stopwords,
    save_model,
    with_sentiment,
)
from .utils import artifact_meta, file_sha256, meta_line, write_json

logger = logging.getLogger(__name__)

Echo = Callable[[str], None]

_SCORE_KEYS = ("documents", "dataset_names", "lexicon", "emoji_lexicon", "source", "cashtag_only", "but_rule")
_MARKET_KEYS = ("prices", "volatility_window", "sample_variance")
_TOPIC_KEYS = (
    "documents", "dataset_names", "source", "cashtag_only", "stopwords", "n_topics", "lda_alpha", "lda_beta",
    "lda_iterations", "min_df", "max_df_fraction", "split_fraction", "seed",
) + _MARKET_KEYS


def _union(*groups: tuple[str, ...]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(k for g in groups for k in g))


# ステージ → 依存する設定キー
STAGE_KEYS: dict[str, tuple[str, ...]] = {
    "score": _SCORE_KEYS,
    "aggregate": _union(_SCORE_KEYS, ("prices",)),
    "market": _MARKET_KEYS,
    "correlate": _union(_SCORE_KEYS, _MARKET_KEYS),
    "granger": _union(_SCORE_KEYS, _MARKET_KEYS, ("lags",)),
    "topics-train": _TOPIC_KEYS,
    "topics-infer": _union(_TOPIC_KEYS, _SCORE_KEYS, ("infer_burn_in", "infer_samples", "feature_mode")),
}
STAGE_KEYS["classify-train"] = _union(STAGE_KEYS["topics-infer"], ("learning_rate", "epochs", "l2_lambda", "standardize"))
STAGE_KEYS["classify-eval"] = STAGE_KEYS["classify-train"]

STAGES = tuple(STAGE_KEYS)
MANIFEST_NAME = "manifest.json"


@dataclass
class StageResult:
    """ステージの出力"""
    stage: str
    config_hash: str
    files: list[Path] = field(default_factory=list)


def stage_hash(cfg: RunConfig, stage: str) -> str:
    """ステージが依存する設定キーだけのハッシュ"""
    return cfg.config_hash(list(STAGE_KEYS[stage]))


@contextmanager
def running(stage: str) -> Iterator[None]:
    """ステージ内の失敗を StageError にまとめる"""
    try:
        yield
    except StageError:
        raise
    except (SenvolError, OSError) as e:
        raise StageError(stage, e) from e


def _quiet(_: str) -> None:
    pass


# ----------------------------------------------------------------------
# 入力の読み込み
# ----------------------------------------------------------------------

def _artifact(cfg: RunConfig, base: str, dataset: str, ext: str) -> Path:
    """データセットが複数なら "<base>_<dataset>.<ext>"、1つなら "<base>.<ext>" """
    if len(cfg.documents) > 1:
        return cfg.output_dir / f"{base}_{dataset}.{ext}"
    return cfg.output_dir / f"{base}.{ext}"


def _rules(cfg: RunConfig) -> RuleConfig:
    return RuleConfig(but_rule=cfg.but_rule)


def _lexicon(cfg: RunConfig) -> Lexicon:
    cfg.require("lexicon")
    return load_lexicon(cfg.lexicon, cfg.emoji_lexicon)


def _documents(cfg: RunConfig, path: Path) -> list[Document]:
    source = Source(cfg.source) if cfg.source else None
    return list(load_documents(path, source_filter=source, cashtag_only=cfg.cashtag_only))


def _market(cfg: RunConfig) -> MarketSeries:
    cfg.require("prices")
    bars = list(load_prices(cfg.prices))
    return build_market_series(bars, cfg.volatility_window, sample=cfg.sample_variance)


def _buckets(docs: list[Document], mkt: MarketSeries) -> list[DayBucket]:
    return list(bucket_by_day(docs, TradingCalendar(tuple(mkt.dates))))


def _daily(cfg: RunConfig, mkt: MarketSeries, lex: Lexicon) -> list[tuple[str, list[DailySentiment]]]:
    cfg.require("documents")
    rules = _rules(cfg)
    return [
        (name, build_daily_series(_buckets(_documents(cfg, path), mkt), lex, rules))
        for name, path in cfg.datasets()
    ]


def training_cutoff(labels: list[DirectionLabel], split_fraction: float) -> date:
    """分類器の評価データが始まる日付（LDA はこれより前の文書だけで学習する）"""
    n = len(labels)
    n_train = math.floor(split_fraction * n)
    if n_train == 0 or n_train == n:
        raise DataError(f"学習データまたは評価データが空になります: ラベル数={n}, split_fraction={split_fraction}")
    return labels[n_train].date


# ----------------------------------------------------------------------
# ステージ
# ----------------------------------------------------------------------

def cmd_score(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """文書ごとのスコア CSV"""
    with running("score"):
        cfg.require("documents")
        lex = _lexicon(cfg)
        rules = _rules(cfg)
        result = StageResult("score", stage_hash(cfg, "score"))
        meta = meta_line("score", result.config_hash, cfg.seed)
        for name, path in cfg.datasets():
            docs = _documents(cfg, path)
            scores = [score_document(doc, lex, rules) for doc in docs]
            out = report.write_scores_csv(_artifact(cfg, "scores", name, "csv"), docs, scores, rules, meta)
            echo(f"  - {name}: {len(docs)} 件 → {out}")
            result.files.append(out)
        return result


def cmd_aggregate(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """日次感情 CSV"""
    with running("aggregate"):
        mkt = _market(cfg)
        lex = _lexicon(cfg)
        result = StageResult("aggregate", stage_hash(cfg, "aggregate"))
        meta = meta_line("aggregate", result.config_hash, cfg.seed)
        for name, series in _daily(cfg, mkt, lex):
            out = write_daily_csv(_artifact(cfg, "daily", name, "csv"), series, meta)
            n_docs = sum(d.n_docs for d in series)
            echo(f"  - {name}: {len(series)} 取引日 / {n_docs} 件 → {out}")
            result.files.append(out)
        return result


def cmd_market(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """市場 CSV（リターン・ボラティリティ・方向ラベル）"""
    with running("market"):
        mkt = _market(cfg)
        result = StageResult("market", stage_hash(cfg, "market"))
        out = write_market_csv(cfg.output_dir / "market.csv", mkt, meta_line("market", result.config_hash, cfg.seed))
        echo(f"  - 取引日 {len(mkt.dates)} / ボラティリティ {len(mkt.volatility)} / ラベル {len(mkt.labels)}")
        echo(f"    方向ラベルの同値: ボラティリティ {mkt.volatility_ties}, リターン {mkt.return_ties}")
        result.files.append(out)
        return result


def cmd_correlate(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """相関グリッド CSV とテキストのヒートマップ"""
    with running("correlate"):
        mkt = _market(cfg)
        datasets = _daily(cfg, mkt, _lexicon(cfg))
        cells = correlation_grid(datasets, mkt, SENTIMENT_DIMS, MARKET_TARGETS, CORRELATION_LAGS)
        result = StageResult("correlate", stage_hash(cfg, "correlate"))
        meta = meta_line("correlate", result.config_hash, cfg.seed)
        result.files.append(report.write_correlation_csv(cfg.output_dir / "correlations.csv", cells, meta))
        result.files.append(report.write_heatmap(cfg.output_dir / "correlations_heatmap.txt", cells, meta))
        n_sig = sum(1 for c in cells if c.result is not None and c.result.significant)
        echo(f"  - セル {len(cells)} / 有意 {n_sig}")
        for line in report.render_heatmap(cells).splitlines():
            echo(f"    {line}")
        return result


def cmd_granger(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """グレンジャー因果性検定 CSV（両方向・全ラグ）"""
    with running("granger"):
        mkt = _market(cfg)
        datasets = _daily(cfg, mkt, _lexicon(cfg))
        cells = granger_grid(datasets, mkt, SENTIMENT_DIMS, MARKET_TARGETS, cfg.lags)
        result = StageResult("granger", stage_hash(cfg, "granger"))
        out = report.write_granger_csv(
            cfg.output_dir / "granger.csv", cells, meta_line("granger", result.config_hash, cfg.seed)
        )
        n_sig = sum(1 for c in cells if c.result is not None and c.result.significant)
        echo(f"  - 検定 {len(cells)} / 有意 {n_sig} → {out}")
        result.files.append(out)
        return result


def cmd_topics_train(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """LDA の学習（分類器の学習期間の文書のみ）"""
    with running("topics-train"):
        cfg.require("documents", "stopwords")
        mkt = _market(cfg)
        cutoff = training_cutoff(mkt.labels, cfg.split_fraction)
        stopwords = load_stopwords(cfg.stopwords)
        result = StageResult("topics-train", stage_hash(cfg, "topics-train"))
        meta = artifact_meta("topics-train", result.config_hash, cfg.seed)
        for name, path in cfg.datasets():
            buckets = _buckets(_documents(cfg, path), mkt)
            train_docs = [doc for b in buckets if b.trading_day < cutoff for doc in b.documents]
            held_out = [doc for b in buckets if b.trading_day >= cutoff for doc in b.documents]
            vocab = build_vocab(train_docs, stopwords, cfg.min_df, cfg.max_df_fraction)
            echo(f"  - {name}: 学習文書 {len(train_docs)} 件（{cutoff} より前）/ 語彙 {len(vocab)} 語")
            model = gibbs_train(
                train_docs,
                vocab,
                n_topics=cfg.n_topics,
                alpha=cfg.lda_alpha,
                beta=cfg.lda_beta,
                iterations=cfg.lda_iterations,
                seed=cfg.seed,
                checkpoint_every=cfg.lda_iterations,
                held_out=held_out,
            )
            for sweep, ppl in model.checkpoints:
                echo(f"    sweep {sweep}: held-out perplexity {ppl:.2f}")
            result.files.append(save_model(_artifact(cfg, "lda_model", name, "json"), model, result.config_hash))
            result.files.append(
                report.write_topics_json(_artifact(cfg, "topics", name, "json"), model, TOP_WORDS, meta)
            )
        return result


def _load_lda(cfg: RunConfig, name: str):
    path = _artifact(cfg, "lda_model", name, "json")
    if not path.is_file():
        raise DataError(f"LDA モデルがありません（先に topics-train を実行してください）: {path}")
    return load_model(path)


def cmd_topics_infer(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """取引日ごとの特徴ベクトル CSV"""
    with running("topics-infer"):
        cfg.require("documents")
        mkt = _market(cfg)
        daily: dict[str, list[DailySentiment]] = {}
        if cfg.feature_mode == "topics+sentiment":
            daily = dict(_daily(cfg, mkt, _lexicon(cfg)))
        result = StageResult("topics-infer", stage_hash(cfg, "topics-infer"))
        meta = meta_line("topics-infer", result.config_hash, cfg.seed)
        base_mode = "count" if cfg.feature_mode == "count" else "distribution"
        for name, path in cfg.datasets():
            model = _load_lda(cfg, name)
            buckets = _buckets(_documents(cfg, path), mkt)
            features = [
                day_feature_vector(model, b, base_mode, cfg.seed, cfg.infer_burn_in, cfg.infer_samples)
                for b in buckets
            ]
            if name in daily:
                by_day = {d.trading_day: d for d in daily[name]}
                features = [with_sentiment(fv, by_day[fv.trading_day]) for fv in features]
            out = report.write_features_csv(_artifact(cfg, "features", name, "csv"), features, meta)
            echo(f"  - {name}: {len(features)} 取引日 × {features[0].features.size} 次元 → {out}")
            result.files.append(out)
        return result


def _labeled(cfg: RunConfig, name: str, mkt: MarketSeries) -> classify.LabeledDataset:
    path = _artifact(cfg, "features", name, "csv")
    if not path.is_file():
        raise DataError(f"特徴ベクトルがありません（先に topics-infer を実行してください）: {path}")
    features: list[DayFeatureVector] = report.read_features_csv(path, cfg.feature_mode)
    return classify.make_dataset(features, mkt.labels, cfg.split_fraction)


def cmd_classify_train(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """ロジスティック回帰の学習"""
    with running("classify-train"):
        mkt = _market(cfg)
        result = StageResult("classify-train", stage_hash(cfg, "classify-train"))
        for name, _ in cfg.datasets():
            data = _labeled(cfg, name, mkt)
            model = classify.train(
                data,
                learning_rate=cfg.learning_rate,
                epochs=cfg.epochs,
                l2_lambda=cfg.l2_lambda,
                seed=cfg.seed,
                feature_mode=cfg.feature_mode,
                standardize=cfg.standardize,
            )
            out = classify.save_model(_artifact(cfg, "classifier", name, "json"), model, result.config_hash)
            loss = f"{model.loss_history[0]:.4f} → {model.loss_history[-1]:.4f}" if model.loss_history else "多数クラス"
            echo(f"  - {name}: 学習 {data.n_train} 日 / 評価 {len(data.test)} 日, 損失 {loss}")
            result.files.append(out)
        return result


def cmd_classify_eval(cfg: RunConfig, echo: Echo = _quiet) -> StageResult:
    """学習データと評価データの両方で評価"""
    with running("classify-eval"):
        mkt = _market(cfg)
        result = StageResult("classify-eval", stage_hash(cfg, "classify-eval"))
        for name, _ in cfg.datasets():
            path = _artifact(cfg, "classifier", name, "json")
            if not path.is_file():
                raise DataError(f"分類モデルがありません（先に classify-train を実行してください）: {path}")
            model = classify.load_model(path)
            data = _labeled(cfg, name, mkt)
            reports = classify.evaluate_splits(model, data)
            out = report.write_eval_json(
                _artifact(cfg, "eval", name, "json"), reports, "classify-eval", result.config_hash, cfg.seed
            )
            for split, rep in reports.items():
                echo(
                    f"  - {name} [{split}] accuracy={rep.accuracy:.3f} precision={rep.precision:.3f} "
                    f"recall={rep.recall:.3f} f1={rep.f1:.3f} (多数クラス {rep.majority_accuracy:.3f})"
                )
            result.files.append(out)
        return result


COMMANDS: dict[str, Callable[[RunConfig, Echo], StageResult]] = {
    "score": cmd_score,
    "aggregate": cmd_aggregate,
    "market": cmd_market,
    "correlate": cmd_correlate,
    "granger": cmd_granger,
    "topics-train": cmd_topics_train,
    "topics-infer": cmd_topics_infer,
    "classify-train": cmd_classify_train,
    "classify-eval": cmd_classify_eval,
}


def build_manifest(cfg: RunConfig, results: list[StageResult]) -> dict:
    """ステージごとの設定ハッシュと成果物の sha256（時刻は含めない）"""
    stages = {}
    for res in results:
        stages[res.stage] = {
            "config_hash": res.config_hash,
            "files": {p.relative_to(cfg.output_dir).as_posix(): file_sha256(p) for p in res.files},
        }
    return {
        "tool": TOOL_NAME,
        "tool_version": TOOL_VERSION,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "stages": stages,
    }


def cmd_pipeline(cfg: RunConfig, echo: Echo = _quiet, stages: Optional[tuple[str, ...]] = None) -> dict:
    """全ステージを依存順に実行して manifest.json を書き出す

    最初に失敗したステージで止まり、StageError を送出する。
    """
    if not cfg.documents:
        raise ConfigError("documents が指定されていません")
    results: list[StageResult] = []
    for name in stages or STAGES:
        echo(f"[{name}]")
        results.append(COMMANDS[name](cfg, echo))
    manifest = build_manifest(cfg, results)
    path = write_json(cfg.output_dir / MANIFEST_NAME, manifest)
    echo(f"manifest: {path}")
    return manifest
