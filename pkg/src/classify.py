"""ボラティリティ方向の分類（ロジスティック回帰）

day t の特徴ベクトルから day t+1 のボラティリティが上がるか（UP / DOWN）を予測する。
学習データと評価データは日付順に分割し、学習側の日付は全て評価側より前になる。
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from datetime import date
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel

from .config import EPOCHS, L2_LAMBDA, LEARNING_RATE, SPLIT_FRACTION
from .errors import DataError, NumericalError
from .market import Direction, DirectionLabel
from .topics import DayFeatureVector
from .utils import artifact_meta, read_json, write_json

logger = logging.getLogger(__name__)

MODEL_FORMAT = "senvol-logistic"
MODEL_VERSION = 2


@dataclass(frozen=True)
class LabeledRow:
    """1日分の学習/評価データ"""
    date: date
    features: np.ndarray
    label: Direction
    split: str  # "train" / "test"


@dataclass
class LabeledDataset:
    """日付順に並んだラベル付きデータ（先頭 n_train 行が学習用）"""
    rows: list[LabeledRow]
    n_train: int

    @property
    def train(self) -> list[LabeledRow]:
        return self.rows[: self.n_train]

    @property
    def test(self) -> list[LabeledRow]:
        return self.rows[self.n_train:]

    @property
    def n_features(self) -> int:
        return int(self.rows[0].features.size)

    def check_no_leakage(self) -> None:
        """学習側の日付が全て評価側より前であることを確認"""
        if self.train and self.test and not self.train[-1].date < self.test[0].date:
            raise DataError(f"学習データと評価データの日付が重なっています: {self.train[-1].date} >= {self.test[0].date}")


def make_dataset(
    features: Sequence[DayFeatureVector],
    labels: Sequence[DirectionLabel],
    split_fraction: float = SPLIT_FRACTION,
) -> LabeledDataset:
    """特徴ベクトルと方向ラベルを日付で内部結合し、日付順に分割

    先頭 ⌊split_fraction·n⌋ 行が学習用、残りが評価用。

    Raises:
        DataError: 結合結果が空、分割のどちらかが空
    """
    if not 0 < split_fraction < 1:
        raise DataError(f"split_fraction は 0 と 1 の間にしてください: {split_fraction}")
    by_date = {lab.date: lab.direction for lab in labels}
    joined = sorted(
        ((fv.trading_day, fv.features, by_date[fv.trading_day]) for fv in features if fv.trading_day in by_date),
        key=lambda t: t[0],
    )
    if not joined:
        raise DataError("特徴ベクトルとラベルの日付が重なりません")
    n = len(joined)
    n_train = math.floor(split_fraction * n)
    if n_train == 0 or n_train == n:
        raise DataError(f"学習データまたは評価データが空になります: n={n}, split_fraction={split_fraction}")

    rows = [
        LabeledRow(date=d, features=np.asarray(x, dtype=np.float64), label=y, split="train" if i < n_train else "test")
        for i, (d, x, y) in enumerate(joined)
    ]
    dims = {r.features.size for r in rows}
    if len(dims) != 1:
        raise DataError(f"特徴ベクトルの次元が揃っていません: {sorted(dims)}")
    data = LabeledDataset(rows=rows, n_train=n_train)
    data.check_no_leakage()
    return data


@dataclass(eq=False)
class LogisticModel:
    """ロジスティック回帰モデル

    weights / bias は元の特徴ベクトルに対する値で、p = sigmoid(w·x + b)。
    標準化して学習した場合も保存前に元の尺度へ戻す。
    """
    weights: np.ndarray
    bias: float
    l2_lambda: float = L2_LAMBDA
    learning_rate: float = LEARNING_RATE
    epochs: int = EPOCHS
    seed: int = 0
    feature_mode: str = "distribution"
    standardized: bool = False  # 学習データの平均・標準偏差で標準化して学習した
    fallback: bool = False  # 多数クラスを返すだけのモデル
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return int(self.weights.size)


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """オーバーフローしないシグモイド"""
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def loss_and_gradient(
    w: np.ndarray,
    b: float,
    x: np.ndarray,
    y: np.ndarray,
    l2_lambda: float,
) -> tuple[float, np.ndarray, float]:
    """平均交差エントロピー + (λ/2)‖w‖² とその勾配

    Returns:
        (loss, dL/dw, dL/db)
    """
    z = x @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2_lambda * float(w @ w))
    resid = sigmoid(z) - y
    grad_w = x.T @ resid / y.size + l2_lambda * w
    grad_b = float(np.mean(resid))
    return loss, grad_w, grad_b


def _labels_to_array(rows: Sequence[LabeledRow]) -> np.ndarray:
    return np.array([1.0 if r.label is Direction.UP else 0.0 for r in rows])


def train(
    data: LabeledDataset,
    learning_rate: float = LEARNING_RATE,
    epochs: int = EPOCHS,
    l2_lambda: float = L2_LAMBDA,
    seed: int = 0,
    feature_mode: str = "distribution",
    standardize: bool = True,
) -> LogisticModel:
    """全バッチの勾配降下法で学習（重みは 0 から開始）

    standardize=True なら学習データの平均・標準偏差で標準化した空間で学習し
    （L2 罰則もその空間の重みにかかる）、最後に元の尺度の (w, b) へ変換する。
    学習行が2未満、またはクラスが片方しかない場合は多数クラスを返すモデルにする。

    Raises:
        NumericalError: 損失が有限でなくなった場合
    """
    rows = data.train
    x_raw = np.vstack([r.features for r in rows])
    y = _labels_to_array(rows)
    n_features = x_raw.shape[1]

    common = dict(
        l2_lambda=l2_lambda, learning_rate=learning_rate, epochs=epochs,
        seed=seed, feature_mode=feature_mode, standardized=standardize,
    )

    if len(rows) < 2 or y.min() == y.max():
        base_rate = float(y.mean())
        p = min(max(base_rate, 1e-6), 1 - 1e-6)
        bias = 0.0 if base_rate >= 0.5 else math.log(p / (1 - p))
        logger.warning("学習データのクラスが1種類のみのため多数クラスを返すモデルにします（UP率=%.3f）", base_rate)
        return LogisticModel(weights=np.zeros(n_features), bias=bias, fallback=True, **common)

    if standardize:
        mean = x_raw.mean(axis=0)
        scale = x_raw.std(axis=0)
        scale[scale == 0] = 1.0
        x = (x_raw - mean) / scale
    else:
        x = x_raw
    w = np.zeros(n_features)
    b = 0.0
    history: list[float] = []
    for epoch in range(epochs):
        loss, grad_w, grad_b = loss_and_gradient(w, b, x, y, l2_lambda)
        if not math.isfinite(loss):
            raise NumericalError(
                f"損失が有限ではありません: epoch={epoch} loss={loss} "
                f"learning_rate={learning_rate} |w|={float(np.linalg.norm(w))} b={b}"
            )
        history.append(loss)
        w = w - learning_rate * grad_w
        b = b - learning_rate * grad_b

    final_loss, _, _ = loss_and_gradient(w, b, x, y, l2_lambda)
    if not math.isfinite(final_loss):
        raise NumericalError(f"損失が有限ではありません: epoch={epochs} loss={final_loss}")
    history.append(final_loss)
    logger.info("ロジスティック回帰: 損失 %.6f → %.6f（%d エポック）", history[0], final_loss, epochs)
    if standardize:
        # (x - mean)/scale · w + b = x · (w/scale) + (b - mean · w/scale)
        w = w / scale
        b = b - float(mean @ w)
    return LogisticModel(weights=w, bias=float(b), loss_history=history, **common)


def predict(model: LogisticModel, x: Sequence[float]) -> tuple[float, Direction]:
    """UP の確率とラベル（w·x + b ≥ 0 なら UP）

    Raises:
        DataError: 次元が一致しない
    """
    xa = np.asarray(x, dtype=np.float64)
    if xa.shape != (model.n_features,):
        raise DataError(f"特徴ベクトルの次元が一致しません: {xa.shape} != ({model.n_features},)")
    z = float(xa @ model.weights + model.bias)
    p = float(sigmoid(z))
    return p, Direction.UP if z >= 0 else Direction.DOWN


class EvalReport(BaseModel):
    """評価結果（正例 = UP、混同行列の行は実際 UP/DOWN、列は予測 UP/DOWN）"""

    split: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    confusion: list[list[int]]
    n_train: int
    n_test: int
    base_rate: float  # 評価データの UP の割合
    majority_accuracy: float
    undefined_metrics: list[str] = []  # 分母が 0 のため 0 とした指標


def metrics_from_confusion(tp: int, fn: int, fp: int, tn: int) -> dict[str, Fraction]:
    """混同行列から指標を有理数で計算（分母 0 の指標は 0）"""
    total = tp + fn + fp + tn
    precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
    recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
    return {
        "accuracy": Fraction(tp + tn, total) if total else Fraction(0),
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def evaluate(model: LogisticModel, rows: Sequence[LabeledRow], n_train: int = 0, split: str = "test") -> EvalReport:
    """混同行列と指標を計算

    Raises:
        DataError: 評価データが空
    """
    if not rows:
        raise DataError("評価データが空です")
    tp = fn = fp = tn = 0
    for row in rows:
        _, pred = predict(model, row.features)
        if row.label is Direction.UP:
            if pred is Direction.UP:
                tp += 1
            else:
                fn += 1
        else:
            if pred is Direction.UP:
                fp += 1
            else:
                tn += 1

    m = metrics_from_confusion(tp, fn, fp, tn)
    undefined = []
    if tp + fp == 0:
        undefined.append("precision")
    if tp + fn == 0:
        undefined.append("recall")
    if m["precision"] + m["recall"] == 0:
        undefined.append("f1")

    base_rate = Fraction(tp + fn, len(rows))
    return EvalReport(
        split=split,
        accuracy=float(m["accuracy"]),
        precision=float(m["precision"]),
        recall=float(m["recall"]),
        f1=float(m["f1"]),
        confusion=[[tp, fn], [fp, tn]],
        n_train=n_train,
        n_test=len(rows),
        base_rate=float(base_rate),
        majority_accuracy=float(max(base_rate, 1 - base_rate)),
        undefined_metrics=undefined,
    )


def evaluate_splits(model: LogisticModel, data: LabeledDataset) -> dict[str, EvalReport]:
    """学習データ（in-sample）と評価データの両方を評価"""
    return {
        "train": evaluate(model, data.train, n_train=data.n_train, split="train"),
        "test": evaluate(model, data.test, n_train=data.n_train, split="test"),
    }


def save_model(path: Path, model: LogisticModel, config_hash: str = "") -> Path:
    """モデルを JSON で保存"""
    data = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "meta": artifact_meta("classify", config_hash, model.seed),
        "n_features": model.n_features,
        "weights": model.weights.tolist(),
        "bias": model.bias,
        "l2_lambda": model.l2_lambda,
        "learning_rate": model.learning_rate,
        "epochs": model.epochs,
        "seed": model.seed,
        "feature_mode": model.feature_mode,
        "standardized": model.standardized,
        "fallback": model.fallback,
    }
    return write_json(path, data)


def load_model(path: Path) -> LogisticModel:
    """保存したモデルを読み込む

    Raises:
        DataError: 形式・バージョンが違う、または内容が壊れている
    """
    data = read_json(path)
    if not isinstance(data, dict) or data.get("format") != MODEL_FORMAT:
        raise DataError(f"分類モデルファイルではありません: {path}")
    if data.get("version") != MODEL_VERSION:
        raise DataError(f"未対応のモデルバージョンです: {data.get('version')}")
    try:
        model = LogisticModel(
            weights=np.asarray(data["weights"], dtype=np.float64),
            bias=float(data["bias"]),
            l2_lambda=float(data["l2_lambda"]),
            learning_rate=float(data["learning_rate"]),
            epochs=int(data["epochs"]),
            seed=int(data["seed"]),
            feature_mode=str(data["feature_mode"]),
            standardized=bool(data["standardized"]),
            fallback=bool(data["fallback"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"分類モデルファイルが壊れています: {path}: {e}") from e
    if model.weights.size != int(data["n_features"]):
        raise DataError("分類モデルの次元が一致しません")
    return model
