"""Model correlation vs the rho-Perfect ceiling, overall and per condition."""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import RatingsTable, _item_means, pearson_corr, rho_perfect
from .errors import EmptyIntersection, RhoPerfectError
from .ingest import conditions, subset
from .report import render_table

ALL = "all"


@dataclass
class SubsetRow:
    condition: str
    n_items: int
    model_pcc: float | None = None
    rho_perfect: float | None = None
    warnings: list[str] = field(default_factory=list)
    skipped: str | None = None

    def to_dict(self):
        return {
            "condition": self.condition,
            "n_items": self.n_items,
            "model_pcc": self.model_pcc,
            "rho_perfect": self.rho_perfect,
            "warnings": self.warnings,
            "skipped": self.skipped,
        }


@dataclass
class SubsetReport:
    rows: list[SubsetRow]
    n_predictions: int
    n_matched: int

    def to_dict(self):
        return {
            "rows": [r.to_dict() for r in self.rows],
            "n_predictions": self.n_predictions,
            "n_matched": self.n_matched,
        }

    def to_text(self) -> str:
        body = []
        for r in self.rows:
            if r.skipped:
                body.append([r.condition, r.n_items, "-", "-", f"skipped: {r.skipped}"])
            else:
                body.append([r.condition, r.n_items, f"{r.model_pcc:.3f}", f"{r.rho_perfect:.3f}", ", ".join(r.warnings)])
        return render_table(["condition", "items", "model PCC", "rho-Perfect", "notes"], body)


def _row(name: str, table: RatingsTable, predictions: dict[str, float]) -> SubsetRow:
    row = SubsetRow(name, table.n)
    if table.n < 2:
        row.skipped = f"only {table.n} item(s) with predictions"
        return row
    try:
        preds = [predictions[i] for i in table.item_ids]
        row.model_pcc = pearson_corr(preds, _item_means(table))
        est = rho_perfect(table)
    except RhoPerfectError as exc:
        row.model_pcc = None
        row.skipped = f"{type(exc).__name__}: {exc}"
        return row
    row.rho_perfect = est.rho
    row.warnings = [w.code.value for w in est.warnings]
    return row


def subset_report(table: RatingsTable, predictions: dict[str, float], by_condition: bool = True) -> SubsetReport:
    """Per condition tag (plus ``all``): PCC of predictions with item means, and rho-Perfect.

    Only items that have a prediction are used, for both numbers.
    """
    matched = table.with_items(it for it in table.items if it.item_id in predictions)
    if matched.n == 0:
        raise EmptyIntersection("no item in the ratings has a prediction")
    rows = [_row(ALL, matched, predictions)]
    if by_condition:
        for tag in conditions(matched):
            rows.append(_row(tag, subset(matched, tag), predictions))
    return SubsetReport(rows, len(predictions), matched.n)
