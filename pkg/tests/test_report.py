import numpy as np
import pandas as pd
import pytest

from hashtag_lifecycle.growth import fit_armax
from hashtag_lifecycle.report import (
    ModelTable,
    coef_cell,
    cox_table,
    curve_table,
    growth_table,
    hazard_cell,
    render_frame,
    significance_stars,
)
from hashtag_lifecycle.survival import fit_cox
from hashtag_lifecycle.synth import gen_armax_series, gen_survival_cohort


@pytest.mark.parametrize("p, stars", [(0.0005, "***"), (0.005, "**"), (0.03, "*"), (0.05, ""), (None, ""), (np.nan, "")])
def test_significance_stars(p, stars):
    assert significance_stars(p) == stars


def test_cell_formats():
    assert coef_cell(0.26512, 0.00731, 1e-6) == "0.2651*** (0.0073)"
    assert hazard_cell(0.99351, 0.00031, 0.02) == "0.9935* (0.0003)"
    assert hazard_cell(1.0, 0.0002, 0.4) == "1.000 (0.0002)"
    assert hazard_cell(1.0012, 0.0003, 0.04) == "1.001* (0.0003)"
    assert coef_cell(1.0, 0.5, stars="+") == "1.0000+ (0.5000)"


def test_render_frame_alignment_and_rule():
    df = pd.DataFrame({"a": ["x", "yyy"], "b": ["1", "22"]})
    text = render_frame(df, "T", split=1, notes=["note"])
    lines = text.splitlines()
    assert lines[0] == "T"
    assert lines[2] == "a    b"
    assert lines.count("-" * 7) == 4
    assert lines[-1] == "note"


def test_model_table_layout():
    t = ModelTable("M", ["v1", "v2"], ["winner", "also_ran"], cells={"winner": {"v1": "c"}}, footer={"winner": {"AIC": "3"}})
    f = t.frame()
    assert list(f.columns) == ["Variables", "Winner", "Also-ran"]
    assert list(f["Variables"]) == ["v1", "v2", "Loglik", "AIC"]
    assert f.iloc[0, 1] == "c" and f.iloc[3, 1] == "3" and f.iloc[0, 2] == ""
    assert t.to_csv().splitlines()[0] == "Variables,Winner,Also-ran"


def test_growth_table_orders_predictors_first():
    design, _ = gen_armax_series([0.3, 0.15, 0.001, 0.1], segments=40, seed=1)
    fit = fit_armax(design)
    t = growth_table({"winner": fit, "also_ran": None})
    assert t.variables[:4] == ["rt", "rp", "src_alpha", "follow_alpha"]
    assert t.variables[-1] == "sigma2"
    assert "const" in t.variables[4:]
    assert t.footer["winner"]["AIC"] == f"{fit.aic:.2f}"
    assert "also_ran" not in t.cells
    assert t.notes[-1].startswith("Standard errors")


def test_cox_table_exponentiates():
    names = ["rt_alpha", "rp_alpha", "src_alpha", "follow_alpha"]
    recs, _ = gen_survival_cohort([0.5, -0.3, 0.1, 0.0], rate=0.05, n=300, seed=2, names=names)
    fit = fit_cox(recs)
    t = cox_table({"winner": fit, "also_ran": fit})
    i = fit.names.index("rt_alpha")
    assert t.cells["winner"]["rt_alpha"].startswith(f"{np.exp(fit.coef[i]):#.4g}")
    assert t.cells["winner"]["rt_alpha"].endswith(f"({fit.se[i]:.4f})")
    assert "exponentiated" in t.notes[-1]
    assert "Winner" in t.render()


def test_curve_table_formats():
    rows = pd.DataFrame({"tag": ["a"], "total": [1234.4], "growth_tpm": [3.14159], "persistence_min": [99.6]})
    out = curve_table(rows)
    assert out.iloc[0].tolist() == ["a", "1234", "3.14", "100"]
