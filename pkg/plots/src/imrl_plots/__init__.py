"""Offline figures from training-run artifacts (eval.csv / report.json)."""

from .bars import render_bars
from .curves import CurveBundle, load_eval_csv, render_curves

__all__ = ["CurveBundle", "load_eval_csv", "render_curves", "render_bars"]
