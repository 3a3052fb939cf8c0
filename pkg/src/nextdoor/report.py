"""Next-Door report: data model, rendering and (de)serialization."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

FORMATS = ("text", "csv", "json")


@dataclass
class ModelColumn:
    """One column of the report: the base model or a proximal model."""

    label: str
    excluded: list
    lam: float
    coef: dict
    intercept: float
    cv_error: float
    debiased_error: float
    test_error: Optional[float] = None
    selection_frequency: Optional[float] = None
    model_pvalue: Optional[float] = None
    model_score: Union[float, str, None] = None
    post_selection_pvalue: Optional[float] = None


@dataclass
class NextDoorReport:
    family: str
    names: list
    lambdas: list
    chosen_index: int
    base: ModelColumn
    proximal: list = field(default_factory=list)
    selection_counts: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def chosen_lambda(self) -> float:
        return self.lambdas[self.chosen_index]

    def ordered(self) -> list:
        """Proximal columns by ascending de-biased error."""
        return sorted(self.proximal, key=lambda c: c.debiased_error)

    def column(self, label) -> ModelColumn:
        for c in self.proximal:
            if c.label == label:
                return c
        raise KeyError(label)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NextDoorReport":
        d = dict(d)
        d["base"] = ModelColumn(**d["base"])
        d["proximal"] = [ModelColumn(**c) for c in d["proximal"]]
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _rows(r: NextDoorReport):
    """Table rows as (label, [cell per column]) with None for blanks."""
    cols = [r.base] + r.ordered()
    names = []
    for c in r.ordered():
        for nm in c.excluded:
            if nm not in names:
                names.append(nm)
    for nm in r.names:
        if nm not in names and any(c.coef.get(nm, 0.0) != 0.0 for c in cols):
            names.append(nm)
    coef_rows = [(nm, [c.coef.get(nm) or None for c in cols]) for nm in names]
    err_rows = [("cv_error", [c.cv_error for c in cols]),
                ("debiased_error", [c.debiased_error for c in cols])]
    if any(c.test_error is not None for c in cols):
        err_rows.append(("test_error", [c.test_error for c in cols]))
    inf_rows = [(label, [getattr(c, attr) for c in cols]) for label, attr in (
        ("selection frequency", "selection_frequency"),
        ("model pvalue", "model_pvalue"),
        ("model score", "model_score"),
        ("post-selection pvalue", "post_selection_pvalue"))]
    return ["base"] + [c.label for c in r.ordered()], coef_rows, err_rows, inf_rows


def _cell(v, digits=3):
    if v is None:
        return ""
    if isinstance(v, str):
        return "below-cutoff"
    return f"{v:.{digits}f}"


def render_text(r: NextDoorReport) -> str:
    header, coef_rows, err_rows, inf_rows = _rows(r)
    groups = [coef_rows, err_rows, inf_rows]
    label_w = max([len(lbl) for g in groups for lbl, _ in g] + [8])
    cells = [[_cell(v) for v in vals] for g in groups for _, vals in g]
    col_w = max([len(h) for h in header] + [len(c) for row in cells for c in row] + [6])

    def line(label, vals):
        return label.ljust(label_w) + "".join(v.rjust(col_w + 2) for v in vals)

    rule = "-" * (label_w + (col_w + 2) * len(header))
    out = [f"lambda = {r.chosen_lambda:.4g} (index {r.chosen_index + 1} of {len(r.lambdas)})",
           rule, line("", header), rule]
    for g in groups:
        for label, vals in g:
            out.append(line(label, [_cell(v) for v in vals]))
        out.append(rule)
    if not r.proximal:
        out.append("note: no predictors selected; nothing to test")
    out.extend(f"note: {n}" for n in r.notes)
    return "\n".join(out) + "\n"


def render_csv(r: NextDoorReport) -> str:
    header, coef_rows, err_rows, inf_rows = _rows(r)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row"] + header)
    for label, vals in coef_rows + err_rows + inf_rows:
        w.writerow([label] + ["" if v is None else v for v in vals])
    return buf.getvalue()


def write_report(r: NextDoorReport, path, format: str = "json") -> None:
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    text = {"text": render_text, "csv": render_csv, "json": NextDoorReport.to_json}[format](r)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise OSError(f"cannot write report to {path}: {e}") from e


def read_report(path) -> NextDoorReport:
    return NextDoorReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
