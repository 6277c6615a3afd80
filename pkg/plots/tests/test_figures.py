import numpy as np
import pytest

from kcip_plots.csvio import SchemaError, columns_as_floats, read_report
from kcip_plots.figures import FigureSpec, PlotError, render

from conftest import write_lines


class TestTripleScaling:
    def test_slope_matches_independent_fit(self, triple_csv, tmp_path):
        out = tmp_path / "fig.png"
        summary = render(FigureSpec("triple-scaling", [str(triple_csv)], str(out)))
        assert out.exists()
        # independent fit straight off the file
        _, columns, rows = read_report(triple_csv)
        data = columns_as_floats(columns, rows, ["n", "zeta_exact"])
        own = np.polyfit(
            np.log([r[0] for r in data]), np.log([r[1] for r in data]), 1
        )[0]
        assert abs(summary["slope"] - own) < 1e-9
        assert abs(summary["slope"] - 3.0) < 0.05

    def test_fit_range_restriction(self, triple_csv, tmp_path):
        out = tmp_path / "fig.png"
        full = render(FigureSpec("triple-scaling", [str(triple_csv)], str(out)))
        tail = render(
            FigureSpec(
                "triple-scaling", [str(triple_csv)], str(out), fit_min=1000
            )
        )
        # the 1/n correction is largest at n=100, so the tail fit is closer to 3
        assert abs(tail["slope"] - 3.0) < abs(full["slope"] - 3.0)

    def test_byte_identical_on_same_input(self, triple_csv, tmp_path):
        a = tmp_path / "a.png"
        b = tmp_path / "b.png"
        render(FigureSpec("triple-scaling", [str(triple_csv)], str(a)))
        render(FigureSpec("triple-scaling", [str(triple_csv)], str(b)))
        assert a.read_bytes() == b.read_bytes()

    def test_byte_identical_svg(self, triple_csv, tmp_path):
        a = tmp_path / "a.svg"
        b = tmp_path / "b.svg"
        render(FigureSpec("triple-scaling", [str(triple_csv)], str(a)))
        render(FigureSpec("triple-scaling", [str(triple_csv)], str(b)))
        assert a.read_bytes() == b.read_bytes()


class TestOtherKinds:
    def test_drift_curve(self, drift_csv, tmp_path):
        out = tmp_path / "drift.png"
        summary = render(FigureSpec("drift-curve", [str(drift_csv)], str(out)))
        assert out.exists() and summary["series"] == 1

    def test_occupation(self, occupation_csv, tmp_path):
        out = tmp_path / "occ.png"
        summary = render(FigureSpec("occupation", [str(occupation_csv)], str(out)))
        assert summary["classes"] == 3
        assert summary["fractions"]["1"] == pytest.approx(0.7)

    def test_tv_decay(self, tv_csv, tmp_path):
        out = tmp_path / "tv.svg"
        summary = render(FigureSpec("tv-decay", [str(tv_csv)], str(out)))
        assert out.exists() and summary["series"] == 1


class TestErrors:
    def test_empty_data_writes_nothing(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_lines(path, ["# schema=1", "# config_hash=x", "n,zeta_exact"])
        out = tmp_path / "fig.png"
        with pytest.raises(PlotError):
            render(FigureSpec("triple-scaling", [str(path)], str(out)))
        assert not out.exists()

    def test_schema_mismatch(self, tmp_path):
        path = tmp_path / "old.csv"
        write_lines(path, ["# schema=0", "n,zeta_exact", "10,1000.0"])
        with pytest.raises(SchemaError):
            render(FigureSpec("triple-scaling", [str(path)], str(tmp_path / "f.png")))

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "odd.csv"
        write_lines(path, ["# schema=1", "a,b", "1,2"])
        with pytest.raises(SchemaError):
            render(FigureSpec("triple-scaling", [str(path)], str(tmp_path / "f.png")))

    def test_unknown_kind(self, triple_csv, tmp_path):
        with pytest.raises(PlotError):
            render(FigureSpec("pie", [str(triple_csv)], str(tmp_path / "f.png")))

    def test_missing_file(self, tmp_path):
        with pytest.raises(SchemaError):
            render(
                FigureSpec(
                    "triple-scaling",
                    [str(tmp_path / "nope.csv")],
                    str(tmp_path / "f.png"),
                )
            )


class TestEndToEnd:
    def test_render_real_cli_output_when_available(self, tmp_path):
        # integration through the file interface only: run the simulator CLI
        # if it is installed, then plot its report
        kcip_cli = pytest.importorskip("kcip_lab.cli")
        code = kcip_cli.main(
            [
                "triple-scaling",
                "--n-grid", "100,1000,10000,100000",
                "--m", "2",
                "--out", str(tmp_path),
            ]
        )
        assert code == 0
        out = tmp_path / "fig.png"
        summary = render(
            FigureSpec("triple-scaling", [str(tmp_path / "triple-scaling.csv")], str(out))
        )
        assert abs(summary["slope"] - 3.0) < 0.05
        assert out.exists()
