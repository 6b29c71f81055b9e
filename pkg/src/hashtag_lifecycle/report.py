"""Table layouts for curve summaries and model fits.

Coefficient cells read ``value[stars] (se)`` with stars at p < 0.05 (*),
0.01 (**) and 0.001 (***).  Growth-model cells print both numbers to four
decimals; persistence-model cells print the hazard ratio to four significant
digits next to the non-exponentiated standard error.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

__all__ = [
    "CLASS_HEADERS",
    "significance_stars",
    "coef_cell",
    "hazard_cell",
    "ModelTable",
    "growth_table",
    "cox_table",
    "curve_table",
    "render_frame",
]

CLASS_HEADERS = {"winner": "Winner", "also_ran": "Also-ran"}


def significance_stars(p: Optional[float]) -> str:
    if p is None or not np.isfinite(p):
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def _stars(p, stars):
    return stars if stars is not None else significance_stars(p)


def coef_cell(value: float, se: float, p: Optional[float] = None, stars: Optional[str] = None) -> str:
    """``0.2651*** (0.0073)`` style cell."""
    return f"{value:.4f}{_stars(p, stars)} ({se:.4f})"


def hazard_cell(ratio: float, se: float, p: Optional[float] = None, stars: Optional[str] = None) -> str:
    """``0.9935* (0.0003)`` style cell; ``ratio`` is already exponentiated."""
    return f"{ratio:#.4g}{_stars(p, stars)} ({se:.4f})"


@dataclass
class ModelTable:
    """Variables down, classes across, Loglik/AIC footer."""

    title: str
    variables: list
    classes: list
    cells: dict = field(default_factory=dict)
    footer: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def frame(self) -> pd.DataFrame:
        headers = [CLASS_HEADERS.get(c, c) for c in self.classes]
        rows = [[v] + [self.cells.get(c, {}).get(v, "") for c in self.classes] for v in self.variables]
        for name in ("Loglik", "AIC"):
            rows.append([name] + [self.footer.get(c, {}).get(name, "") for c in self.classes])
        return pd.DataFrame(rows, columns=["Variables"] + headers)

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.frame().to_csv(buf, index=False, lineterminator="\n")
        return buf.getvalue()

    def render(self) -> str:
        return render_frame(self.frame(), self.title, split=len(self.variables), notes=self.notes)


def render_frame(df: pd.DataFrame, title: str = "", split: Optional[int] = None, notes: Sequence[str] = ()) -> str:
    """Aligned plain-text table; ``split`` draws a rule after that many rows."""
    header = [str(c) for c in df.columns]
    body = df.astype(str).values.tolist()
    widths = [max(len(x) for x in col) for col in zip(header, *body)]

    def line(cells):
        return "  ".join(str(c).ljust(w) for c, w in zip(cells, widths)).rstrip()

    rule = "-" * (sum(widths) + 2 * (len(widths) - 1))
    out = ([title] if title else []) + [rule, line(header), rule]
    if split is None:
        out += [line(r) for r in body]
    else:
        out += [line(r) for r in body[:split]] + [rule] + [line(r) for r in body[split:]]
    out.append(rule)
    out += list(notes)
    return "\n".join(out) + "\n"


def _ordered_union(lists) -> list:
    seen = []
    for names in lists:
        for n in names:
            if n not in seen:
                seen.append(n)
    return seen


def growth_table(fits: Mapping, title: str = "Growth models", classes: Sequence[str] = ("winner", "also_ran")) -> ModelTable:
    """Layout a dict ``class -> ArmaxFit`` (``None`` for a class without a fit).

    Predictor rows come first; the intercept, ARMA parameters and innovation
    variance follow.
    """
    tail = {"const", "sigma2"}
    names = _ordered_union(f.names for f in fits.values() if f is not None)
    lead = [n for n in names if n not in tail and not n.startswith(("ar", "ma"))]
    rest = [n for n in names if n not in lead]
    table = ModelTable(title=title, variables=lead + rest, classes=list(classes))
    for c in classes:
        fit = fits.get(c)
        if fit is None:
            continue
        pv = fit.pvalues
        table.cells[c] = {n: coef_cell(fit.params[i], fit.bse[i], pv[i]) for i, n in enumerate(fit.names)}
        table.footer[c] = {"Loglik": f"{fit.loglik:.2f}", "AIC": f"{fit.aic:.2f}"}
        if fit.se_flag:
            table.notes.append(f"{CLASS_HEADERS.get(c, c)}: {fit.se_flag}")
    table.notes.append("Standard errors from the observed information matrix.")
    return table


def cox_table(fits: Mapping, title: str = "Persistence models", classes: Sequence[str] = ("winner", "also_ran")) -> ModelTable:
    """Layout a dict ``class -> CoxFit`` with exponentiated coefficients."""
    names = _ordered_union(f.names for f in fits.values() if f is not None)
    table = ModelTable(title=title, variables=names, classes=list(classes))
    for c in classes:
        fit = fits.get(c)
        if fit is None:
            continue
        pv = fit.pvalues
        # significance is meaningless along a diverging likelihood
        stars = "" if fit.monotone else None
        table.cells[c] = {n: hazard_cell(fit.hazard_ratios[i], fit.se[i], pv[i], stars) for i, n in enumerate(fit.names)}
        table.footer[c] = {"Loglik": f"{fit.loglik:.7g}", "AIC": f"{fit.aic:.7g}"}
        label = CLASS_HEADERS.get(c, c)
        if fit.monotone:
            table.notes.append(f"{label}: monotone likelihood, coefficients diverge")
        if not fit.converged:
            table.notes.append(f"{label}: Newton iterations did not converge")
        if fit.dropped:
            table.notes.append(f"{label}: dropped constant covariates {', '.join(fit.dropped)}")
    table.notes.append("Coefficients exponentiated; standard errors are not.")
    return table


def curve_table(rows: pd.DataFrame) -> pd.DataFrame:
    """Per-hashtag total, growth and persistence, formatted for display."""
    return pd.DataFrame(
        {
            "Hashtag": rows["tag"].astype(str).to_numpy(),
            "Total": [f"{v:.0f}" for v in rows["total"]],
            "Growth (tpm)": [f"{v:.2f}" for v in rows["growth_tpm"]],
            "Persistence (min)": [f"{v:.0f}" for v in rows["persistence_min"]],
        }
    )
