"""End-to-end runs of the command-line pipeline."""
import json

import numpy as np
import pytest

from reld.cli import main
from reld.forecaster import load_model
from reld.report import load_mask_csv
from reld.series import load_csv


def _gen_args(out, name="series", extra=()):
    return [
        "gen", "--kind", "periodic", "--length", "512", "--period", "32",
        "--seed", "7", "--out", str(out), "--name", name, *extra,
    ]


class TestGen:
    def test_periodic_reruns_are_byte_identical(self, tmp_path):
        out = tmp_path / "a"
        assert main(_gen_args(out, extra=["--no-figures"])) == 0
        first = (out / "series.csv").read_bytes()
        assert main(_gen_args(out, extra=["--no-figures"])) == 0
        assert (out / "series.csv").read_bytes() == first

    def test_series_loadable_and_flag_header_present(self, tmp_path):
        assert main(_gen_args(tmp_path, extra=["--no-figures"])) == 0
        path = tmp_path / "series.csv"
        first = path.read_text().splitlines()[0]
        assert first.startswith("# reld gen")
        series = load_csv(path)
        assert series.length == 512 and series.num_dims == 1

    def test_events_produce_mask_file(self, tmp_path):
        args = _gen_args(tmp_path, extra=["--event", "fluke:100:1:5.0", "--no-figures"])
        assert main(args) == 0
        mask = load_mask_csv(tmp_path / "series.mask.csv")
        assert mask.shape == (512,)
        assert mask.sum() == 1 and mask[100]

    def test_rect_broken_writes_series_and_mask(self, tmp_path):
        args = [
            "gen", "--kind", "rect", "--length", "256", "--period", "16",
            "--broken", "--removal-prob", "0.5", "--seed", "3",
            "--out", str(tmp_path), "--no-figures",
        ]
        assert main(args) == 0
        assert (tmp_path / "rect.csv").exists()
        assert load_mask_csv(tmp_path / "rect.mask.csv").any()

    def test_figures_rendered_by_default(self, tmp_path):
        assert main(_gen_args(tmp_path)) == 0
        assert (tmp_path / "series.png").exists()


class TestWeigh:
    @pytest.fixture()
    def data_csv(self, tmp_path):
        out = tmp_path / "data"
        assert main(_gen_args(out, extra=["--noise-sigma", "0.1", "--no-figures"])) == 0
        return out / "series.csv"

    def test_outputs_and_headers(self, tmp_path, data_csv, capsys):
        out = tmp_path / "w"
        args = [
            "weigh", "--data", str(data_csv), "--input-len", "32", "--output-len", "32",
            "--scheme", "reld", "--out", str(out),
        ]
        assert main(args) == 0
        for name in ("ld_profile.csv", "weights.csv", "density_dim0.csv"):
            lines = (out / name).read_text().splitlines()
            assert lines[0].startswith("# reld weigh")
        for name in ("ld_profile.png", "weights.png", "density_dim0.png"):
            assert (out / name).exists()
        assert "weighting stage" in capsys.readouterr().out

    def test_weights_csv_schema(self, tmp_path, data_csv):
        out = tmp_path / "w2"
        assert main(["weigh", "--data", str(data_csv), "--input-len", "16",
                     "--output-len", "16", "--out", str(out), "--no-figures"]) == 0
        lines = (out / "weights.csv").read_text().splitlines()
        assert lines[1] == "t,dim,ld,weight"
        t, dim, ld, w = lines[2].split(",")
        assert int(t) == 16 and int(dim) == 0
        float(ld), float(w)

    def test_metric_choices_give_distinct_profiles(self, tmp_path, data_csv):
        outs = {}
        for metric in ("welch", "kpss"):
            out = tmp_path / metric
            assert main(["weigh", "--data", str(data_csv), "--input-len", "16",
                         "--output-len", "16", "--metric", metric,
                         "--out", str(out), "--no-figures"]) == 0
            outs[metric] = (out / "ld_profile.csv").read_text().splitlines()
        assert len(outs["welch"]) == len(outs["kpss"])
        assert outs["welch"][2:] != outs["kpss"][2:]

    def test_constant_input_gives_unit_weights(self, tmp_path):
        p = tmp_path / "const.csv"
        p.write_text("v1\n" + "\n".join(["4.0"] * 200) + "\n")
        out = tmp_path / "w3"
        assert main(["weigh", "--data", str(p), "--input-len", "8", "--output-len", "8",
                     "--out", str(out), "--no-figures"]) == 0
        weights = [float(ln.split(",")[3]) for ln in (out / "weights.csv").read_text().splitlines()[2:]]
        assert all(w == 1.0 for w in weights)


class TestTrainEval:
    @pytest.fixture()
    def labeled_data(self, tmp_path):
        out = tmp_path / "data"
        args = _gen_args(out, extra=[
            "--noise-sigma", "0.05",
            "--event", "fluke:150:1:5.0",
            "--event", "fluke:490:1:5.0",
            "--no-figures",
        ])
        assert main(args) == 0
        return out / "series.csv", out / "series.mask.csv"

    def _run(self, data, mask, out, scheme="reld", extra=()):
        args = [
            "train-eval", "--data", str(data), "--scheme", scheme,
            "--input-len", "32", "--output-len", "32", "--split", "0.7",
            "--epochs", "3", "--batch-size", "16", "--lr", "0.01",
            "--out", str(out), "--no-figures", *extra,
        ]
        if mask is not None:
            args += ["--mask", str(mask)]
        return main(args)

    def test_report_files_with_split_metrics(self, tmp_path, labeled_data):
        data, mask = labeled_data
        out = tmp_path / "run"
        assert self._run(data, mask, out) == 0
        text = (out / "report.txt").read_text()
        assert "mse=" in text and "mse_abrupt=" in text
        payload = json.loads((out / "report.json").read_text())
        assert payload["scheme"] == "reld"
        assert payload["mse_abrupt"] is not None
        assert payload["count_abrupt"] > 0
        model = load_model(out / "model.txt")
        assert model.input_len == 32
        assert (out / "loss_trace.csv").exists()

    def test_missing_mask_warns_and_omits_split(self, tmp_path, labeled_data, capsys):
        data, _ = labeled_data
        out = tmp_path / "run2"
        assert self._run(data, None, out) == 0
        assert "no --mask" in capsys.readouterr().err
        payload = json.loads((out / "report.json").read_text())
        assert payload["mse_abrupt"] is None

    @pytest.mark.parametrize("scheme", ["uniform", "invld", "focal-r", "flip-focal-r", "invl2"])
    def test_all_schemes_run(self, tmp_path, labeled_data, scheme):
        data, mask = labeled_data
        assert self._run(data, mask, tmp_path / scheme, scheme=scheme) == 0

    def test_uniform_and_reld_reports_differ(self, tmp_path, labeled_data):
        data, mask = labeled_data
        self._run(data, mask, tmp_path / "u", scheme="uniform")
        self._run(data, mask, tmp_path / "r", scheme="reld")
        mse_u = json.loads((tmp_path / "u" / "report.json").read_text())["mse"]
        mse_r = json.loads((tmp_path / "r" / "report.json").read_text())["mse"]
        assert mse_u != mse_r

    def test_bins_sensitivity_runs(self, tmp_path, labeled_data):
        data, mask = labeled_data
        for bins in ("50", "400"):
            out = tmp_path / f"bins{bins}"
            assert self._run(data, mask, out, extra=["--bins", bins]) == 0

    def test_figures_rendered(self, tmp_path, labeled_data):
        data, mask = labeled_data
        out = tmp_path / "figs"
        args = [
            "train-eval", "--data", str(data), "--mask", str(mask),
            "--input-len", "32", "--output-len", "32", "--epochs", "2",
            "--out", str(out),
        ]
        assert main(args) == 0
        assert (out / "loss_trace.png").exists()
        assert (out / "forecast.png").exists()
        assert (out / "weights.png").exists()


class TestVerify:
    def test_passes_with_exit_zero(self):
        assert main(["verify"]) == 0


class TestExitCodes:
    def test_usage_error_is_exit_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["weigh", "--nonsense"])
        assert exc.value.code == 1

    def test_unknown_command_is_exit_1(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_missing_data_file_is_exit_2(self, tmp_path):
        assert main(["weigh", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2

    def test_malformed_csv_is_exit_2(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("v1\n1\nzzz\n")
        assert main(["weigh", "--data", str(p), "--out", str(tmp_path)]) == 2

    def test_window_too_long_is_exit_2(self, tmp_path):
        p = tmp_path / "short.csv"
        p.write_text("v1\n" + "\n".join("1" for _ in range(10)) + "\n")
        assert main(["weigh", "--data", str(p), "--input-len", "96",
                     "--output-len", "96", "--out", str(tmp_path)]) == 2
