import json

import numpy as np
import pytest

from imrl_plots import CurveBundle, load_eval_csv, render_bars, render_curves
from imrl_plots.cli import main as cli_main
from imrl_plots.curves import SchemaError

EVAL_HEADER = "step,mean_return,std_return"


def write_eval_csv(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [EVAL_HEADER] + [f"{int(s)},{m},{sd}" for s, m, sd in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def pendulum_comparison(tmp_path, seeds=5):
    """Synthetic 2-arm pendulum comparison in the harness output layout."""
    rng = np.random.default_rng(7)
    steps = np.arange(0, 12500, 2500)
    arms = {}
    for arm, lift in (("base", 0.0), ("variant", 60.0)):
        csvs = []
        for seed in range(seeds):
            progress = np.linspace(-1250.0, -170.0 + lift, len(steps))
            noise = rng.normal(0.0, 40.0, len(steps))
            rows = [(s, m + n, 25.0) for s, m, n in zip(steps, progress, noise)]
            p = tmp_path / arm / f"seed{seed}" / "eval.csv"
            write_eval_csv(p, rows)
            csvs.append(p)
        arms[arm] = csvs
    return steps, arms


def write_report(path, steps_to_match, T=10000):
    report = {
        "T": T,
        "seeds": [0, 1, 2, 3, 4],
        "rows": [{
            "task": "pendulum",
            "algo": "sac",
            "baseline": {"mean": -180.0, "std": 30.0, "per_seed": {}, "failed": 0},
            "variant": {"mean": -150.0, "std": 25.0, "per_seed": {}, "failed": 0},
            "promotion_pct": 16.7,
            "steps_to_match": steps_to_match,
        }],
    }
    path.write_text(json.dumps(report), encoding="utf-8")
    return report


# ---------------------------------------------------------------- curves

def test_two_arm_five_seed_comparison_structure_and_bands(tmp_path):
    steps, arms = pendulum_comparison(tmp_path)
    out = tmp_path / "fig.png"
    fig = render_curves(list(arms.items()), out)
    assert out.exists() and out.stat().st_size > 0

    ax = fig.axes[0]
    assert len(ax.lines) == 2      # one mean curve per arm
    assert len(ax.collections) == 2  # one std band per arm

    # axis ranges cover the eval grid
    x_lo, x_hi = ax.get_xlim()
    assert x_lo <= steps[0] and x_hi >= steps[-1]

    for line, band, (label, csvs) in zip(ax.lines, ax.collections, arms.items()):
        per_seed = np.stack([load_eval_csv(p)[:, 1] for p in csvs])
        mean = per_seed.mean(axis=0)
        std = per_seed.std(axis=0)
        assert np.allclose(line.get_ydata(), mean, atol=1e-12)
        verts = band.get_paths()[0].vertices
        for x, lo, hi in zip(steps, mean - std, mean + std):
            at_x = verts[np.isclose(verts[:, 0], x)][:, 1]
            assert np.isclose(at_x, lo, atol=1e-9).any()
            assert np.isclose(at_x, hi, atol=1e-9).any()
        y_lo, y_hi = ax.get_ylim()
        assert y_lo <= (mean - std).min() and y_hi >= (mean + std).max()


def test_single_point_series_renders_marker(tmp_path):
    p = tmp_path / "one" / "eval.csv"
    write_eval_csv(p, [(0, -100.0, 5.0)])
    fig = render_curves([p], tmp_path / "one.png")
    ax = fig.axes[0]
    assert len(ax.lines) == 1
    assert ax.lines[0].get_marker() == "o"
    assert (tmp_path / "one.png").exists()


def test_identical_arms_overlap_exactly(tmp_path):
    rows = [(0, -500.0, 10.0), (1000, -300.0, 10.0), (2000, -150.0, 10.0)]
    a = tmp_path / "a" / "eval.csv"
    b = tmp_path / "b" / "eval.csv"
    write_eval_csv(a, rows)
    write_eval_csv(b, rows)
    fig = render_curves([("a", [a]), ("b", [b])], tmp_path / "fig.png")
    ax = fig.axes[0]
    assert np.array_equal(ax.lines[0].get_ydata(), ax.lines[1].get_ydata())


def test_schema_mismatch_names_the_column(tmp_path):
    p = tmp_path / "bad" / "eval.csv"
    p.parent.mkdir(parents=True)
    p.write_text("step,avg_return,std_return\n0,1.0,0.0\n")
    with pytest.raises(SchemaError, match="mean_return"):
        render_curves([p], tmp_path / "fig.png")


def test_rendering_never_mutates_inputs(tmp_path):
    _, arms = pendulum_comparison(tmp_path, seeds=2)
    before = {p: p.read_bytes() for csvs in arms.values() for p in csvs}
    render_curves(list(arms.items()), tmp_path / "fig.png")
    for p, raw in before.items():
        assert p.read_bytes() == raw


def test_smoothing_states_window_in_legend(tmp_path):
    rows = [(i * 500, -400.0 + 20 * i, 5.0) for i in range(8)]
    p = tmp_path / "arm" / "eval.csv"
    write_eval_csv(p, rows)
    fig = render_curves([("arm", [p])], tmp_path / "fig.png", smooth_window=3)
    labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
    assert labels == ["arm (MA@3)"]


def test_nearest_step_alignment(tmp_path):
    a = tmp_path / "arm" / "s0" / "eval.csv"
    b = tmp_path / "arm" / "s1" / "eval.csv"
    write_eval_csv(a, [(0, -10.0, 0.0), (1000, -20.0, 0.0)])
    write_eval_csv(b, [(1, -12.0, 0.0), (999, -22.0, 0.0)])
    bundle = CurveBundle("arm", [a, b])
    assert np.allclose(bundle.mean, [-11.0, -21.0])


# ---------------------------------------------------------------- bars

def test_bar_height_point_three(tmp_path):
    report = tmp_path / "report.json"
    write_report(report, steps_to_match=3000, T=10000)
    fig = render_bars(report, tmp_path / "bars.png")
    ax = fig.axes[0]
    bars = [p for p in ax.patches]
    assert len(bars) == 1
    assert bars[0].get_height() == pytest.approx(0.3)
    assert bars[0].get_hatch() is None


def test_bar_at_exact_T_is_full_height(tmp_path):
    report = tmp_path / "report.json"
    write_report(report, steps_to_match=10000, T=10000)
    fig = render_bars(report, tmp_path / "bars.png")
    assert fig.axes[0].patches[0].get_height() == pytest.approx(1.0)


def test_infinity_sentinel_hatched_no_numeric_label(tmp_path):
    report = tmp_path / "report.json"
    write_report(report, steps_to_match="inf")
    fig = render_bars(report, tmp_path / "bars.png")
    ax = fig.axes[0]
    bar = ax.patches[0]
    assert bar.get_hatch() == "//"
    assert bar.get_height() == pytest.approx(1.0)
    texts = [t.get_text() for t in ax.texts]
    assert "never" in texts
    assert not any(t.replace(".", "").isdigit() for t in texts)


def test_bars_missing_field_is_explicit_error(tmp_path):
    report = tmp_path / "report.json"
    data = write_report(report, 3000)
    del data["rows"][0]["steps_to_match"]
    report.write_text(json.dumps(data))
    with pytest.raises(SchemaError, match="steps_to_match"):
        render_bars(report, tmp_path / "bars.png")


# ---------------------------------------------------------------- cli

def test_cli_curves_and_bars(tmp_path, capsys):
    _, arms = pendulum_comparison(tmp_path, seeds=3)
    rc = cli_main(["curves", "--in", str(tmp_path / "base"), str(tmp_path / "variant"),
                   "--out", str(tmp_path / "curves.png")])
    assert rc == 0 and (tmp_path / "curves.png").exists()

    report = tmp_path / "report.json"
    write_report(report, steps_to_match=3000)
    rc = cli_main(["bars", "--report", str(report), "--out", str(tmp_path / "bars.png")])
    assert rc == 0 and (tmp_path / "bars.png").exists()


def test_cli_missing_csv_errors(tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    rc = cli_main(["curves", "--in", str(tmp_path / "empty"),
                   "--out", str(tmp_path / "x.png")])
    assert rc == 2
    assert "eval.csv" in capsys.readouterr().err
