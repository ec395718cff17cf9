"""例外定義

CLIの終了コード:
    0: 成功
    1: 実行時エラー / データエラー（DataError, NumericalError, StageError）
    2: 使い方・設定エラー（ConfigError）
"""
from __future__ import annotations


class SenvolError(Exception):
    """パイプライン共通の基底例外"""

    exit_code = 1


class DataError(SenvolError, ValueError):
    """入力データが不正（致命的なデータ条件を含む）"""


class NumericalError(SenvolError, ValueError):
    """数値計算の失敗（特異な計画行列、非有限な損失、定義域外の引数など）"""


class ConfigError(SenvolError):
    """設定・引数の誤り"""

    exit_code = 2


class StageError(SenvolError):
    """パイプラインのステージ失敗（ステージ名付き）"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"ステージ '{stage}' で失敗しました: {cause}")

    @property
    def exit_code(self) -> int:  # type: ignore[override]
        # 設定起因の失敗は 2 のまま伝える
        return getattr(self.cause, "exit_code", 1)
