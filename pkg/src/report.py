"""成果物の書き出し

文書スコア CSV、相関グリッド CSV とテキストのヒートマップ、グレンジャー検定 CSV、
トピック一覧 JSON、分類器の評価 JSON。
"""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .classify import EvalReport
from .config import SIGNIFICANCE_LEVEL
from .corpus import Document
from .errors import DataError
from .sentiment import DEFAULT_RULES, RuleConfig, SentimentScores, classify_polarity
from .stats import CorrelationCell, GrangerCell
from .topics import DayFeatureVector, LdaModel, topics_report
from .utils import artifact_meta, format_float, parse_date, read_csv_rows, write_csv, write_json

SCORES_HEADER = ("id", "date", "neg", "neu", "pos", "compound", "polarity")
CORRELATION_HEADER = ("dataset", "sentiment_dim", "target", "lag", "r", "p", "n", "significant")
GRANGER_HEADER = ("direction", "lag", "F", "p", "df1", "df2", "significant")

HEATMAP_CELL_WIDTH = 9


def write_scores_csv(
    path: Path,
    documents: Sequence[Document],
    scores: Sequence[SentimentScores],
    cfg: RuleConfig = DEFAULT_RULES,
    meta: Optional[str] = None,
) -> Path:
    """文書ごとのスコア CSV"""
    rows = (
        [
            doc.id,
            doc.date.isoformat(),
            format_float(s.neg),
            format_float(s.neu),
            format_float(s.pos),
            format_float(s.compound),
            classify_polarity(s, cfg).value,
        ]
        for doc, s in zip(documents, scores)
    )
    return write_csv(path, SCORES_HEADER, rows, meta=meta)


def _flag(significant: bool) -> str:
    return "1" if significant else "0"


def write_correlation_csv(path: Path, cells: Sequence[CorrelationCell], meta: Optional[str] = None) -> Path:
    """相関グリッド CSV（計算できなかったセルは値を空欄）"""
    rows = []
    for c in cells:
        if c.result is None:
            rows.append([c.dataset, c.sentiment_dim, c.target, c.lag, "", "", "", ""])
        else:
            rows.append([
                c.dataset, c.sentiment_dim, c.target, c.lag,
                format_float(c.result.r), format_float(c.result.p_value), c.result.n,
                _flag(c.result.significant),
            ])
    return write_csv(path, CORRELATION_HEADER, rows, meta=meta)


def render_heatmap(cells: Sequence[CorrelationCell]) -> str:
    """相関グリッドのテキスト表示（行 = 感情次元、列 = 市場系列 × ラグ）

    p < 0.05 のセルには '*' を付ける。
    """
    lines: list[str] = []
    datasets = list(dict.fromkeys(c.dataset for c in cells))
    for name in datasets:
        subset = [c for c in cells if c.dataset == name]
        dims = list(dict.fromkeys(c.sentiment_dim for c in subset))
        columns = list(dict.fromkeys((c.target, c.lag) for c in subset))
        lookup = {(c.sentiment_dim, c.target, c.lag): c for c in subset}
        label_width = max(len(d) for d in dims) + 2

        lines.append(f"[{name}]  * p < {SIGNIFICANCE_LEVEL}")
        header = " " * label_width + "".join(f"{t}+{lag}".rjust(HEATMAP_CELL_WIDTH) for t, lag in columns)
        lines.append(header)
        for dim in dims:
            row = dim.ljust(label_width)
            for target, lag in columns:
                cell = lookup.get((dim, target, lag))
                if cell is None or cell.result is None:
                    text = "n/a "
                else:
                    text = f"{cell.result.r:+.3f}" + ("*" if cell.result.significant else " ")
                row += text.rjust(HEATMAP_CELL_WIDTH)
            lines.append(row.rstrip())
        lines.append("")
    return "\n".join(lines)


def write_heatmap(path: Path, cells: Sequence[CorrelationCell], meta: Optional[str] = None) -> Path:
    """ヒートマップのテキストを書き出す"""
    text = render_heatmap(cells)
    if meta:
        text = meta + "\n" + text
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


def write_granger_csv(path: Path, cells: Sequence[GrangerCell], meta: Optional[str] = None) -> Path:
    """グレンジャー検定 CSV（direction は "dataset:cause->effect"）"""
    rows = []
    for c in cells:
        if c.result is None:
            rows.append([c.direction_label, c.lag, "", "", "", "", ""])
        else:
            r = c.result
            rows.append([
                c.direction_label, c.lag, format_float(r.f_stat), format_float(r.p_value),
                r.df1, r.df2, _flag(r.significant),
            ])
    return write_csv(path, GRANGER_HEADER, rows, meta=meta)


def write_topics_json(path: Path, model: LdaModel, m: int, meta: dict) -> Path:
    """トピックごとの上位語 JSON"""
    return write_json(path, {"meta": meta, "topics": topics_report(model, m)})


def write_features_csv(path: Path, features: Sequence[DayFeatureVector], meta: Optional[str] = None) -> Path:
    """日次特徴ベクトル CSV（列 f0..f{K-1}）"""
    width = features[0].features.size if features else 0
    header = ["date"] + [f"f{i}" for i in range(width)]
    rows = ([fv.trading_day.isoformat()] + [format_float(float(x)) for x in fv.features] for fv in features)
    return write_csv(path, header, rows, meta=meta)


def write_eval_json(
    path: Path,
    reports: Mapping[str, EvalReport],
    stage: str,
    config_hash: str,
    seed: int,
) -> Path:
    """評価結果 JSON（train / test を分けて出力）"""
    data = {
        "meta": artifact_meta(stage, config_hash, seed),
        "splits": {name: report.model_dump() for name, report in reports.items()},
    }
    return write_json(path, data)


def read_features_csv(path: Path, mode: str = "distribution") -> list[DayFeatureVector]:
    """write_features_csv で書いた特徴ベクトルを読む

    Raises:
        DataError: 読めない、または値が数値でない
    """
    features: list[DayFeatureVector] = []
    for row_no, row in enumerate(read_csv_rows(path), start=2):
        try:
            day = parse_date(row["date"])
            values = [float(v) for k, v in row.items() if k != "date"]
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"特徴ベクトルの行を解析できません: {path.name}:{row_no}: {e}") from e
        features.append(DayFeatureVector(trading_day=day, features=np.asarray(values), mode=mode))
    if not features:
        raise DataError(f"特徴ベクトルがありません: {path}")
    return features
