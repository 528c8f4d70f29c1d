import re
import subprocess
import sys

import pytest

from fatigue_mlp import dataset as ds
from fatigue_mlp import nn
from fatigue_mlp.cli import main, read_train_report


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "syn.csv"
    assert main(["gen-synthetic", "--out", str(path), "--seed", "7", "--points", "30"]) == 0
    return path


@pytest.fixture(scope="module")
def run_dir(small_data, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["train", "--data", str(small_data), "--out", str(out), "--seed", "7",
                 "--max-epochs", "40"])
    assert code == 0
    return out


class TestGenSynthetic:
    def test_twelve_series(self, small_data, capsys):
        d = ds.read_csv(small_data)
        assert len(d.series) == 12
        assert {s.condition for s in d.series} == set(ds.STANDARD_CONDITIONS)

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        main(["gen-synthetic", "--out", str(a), "--seed", "42"])
        main(["gen-synthetic", "--out", str(b), "--seed", "42"])
        assert a.read_bytes() == b.read_bytes()
        out = capsys.readouterr().out
        assert "12 series, 1800 points" in out
        assert '"C": 1e-08' in out

    def test_unwritable_path(self, tmp_path, capsys):
        code = main(["gen-synthetic", "--out", str(tmp_path / "missing" / "x.csv")])
        assert code == 1
        assert "cannot write" in capsys.readouterr().err

    def test_too_few_points(self, tmp_path, capsys):
        assert main(["gen-synthetic", "--out", str(tmp_path / "x.csv"), "--points", "5"]) == 2


class TestTrain:
    def test_outputs(self, run_dir):
        for name in ("model.txt", "train_report.txt", "splits.csv"):
            assert (run_dir / name).is_file()
        info = read_train_report(run_dir / "train_report.txt")
        assert info["seed"] == "7" and info["arch"] == "3-75-1"
        assert len(info["data_sha256"]) == 64

    def test_arch_flag(self, small_data, tmp_path, capsys):
        out = tmp_path / "r"
        code = main(["train", "--data", str(small_data), "--out", str(out), "--arch", "3-9-4-1",
                     "--max-epochs", "2"])
        assert code == 0
        assert nn.load(out / "model.txt").layer_sizes == (3, 9, 4, 1)

    def test_fraction_sum(self, small_data, tmp_path, capsys):
        code = main(["train", "--data", str(small_data), "--out", str(tmp_path),
                     "--train-fraction", "0.9"])
        assert code == 2
        err = capsys.readouterr().err
        assert "train_fraction" in err and "val_fraction" in err and "test_fraction" in err

    def test_missing_data(self, tmp_path, capsys):
        assert main(["train", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path)]) == 2

    def test_malformed_data(self, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("series_id,R,R_ol,N,a_mm\ns,0.1,CA,10,5\ns,0.1,CA,5,6\n")
        # module errors surface verbatim with the runtime exit code
        assert main(["train", "--data", str(bad), "--out", str(tmp_path / "o")]) == 1
        err = capsys.readouterr().err
        assert "NonMonotonicCycles" in err and "line 3" in err

    def test_config_precedence(self, small_data, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text(f"# test config\ndata_path = {small_data}\nmax_epochs = 3\n"
                        "seed = 5\narch = 3-4-1\n")
        out = tmp_path / "r"
        code = main(["train", "--config", str(conf), "--out", str(out), "--seed", "9"])
        assert code == 0
        info = read_train_report(out / "train_report.txt")
        assert info["seed"] == "9"
        assert info["max_epochs"] == "3" and info["arch"] == "3-4-1"

    def test_bad_config_key(self, tmp_path, capsys):
        conf = tmp_path / "run.conf"
        conf.write_text("colour = blue\n")
        assert main(["train", "--config", str(conf)]) == 2


class TestEval:
    def test_report_lines(self, run_dir, capsys):
        assert main(["eval", "--out", str(run_dir)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert re.fullmatch(r"MAPE\(dev-test\) = \d+\.\d{2}%", lines[0])
        assert len(lines) == 13
        assert (run_dir / "tables.txt").is_file() and (run_dir / "scatter.csv").is_file()

    def test_idempotent(self, run_dir, capsys):
        main(["eval", "--out", str(run_dir)])
        first = [(run_dir / n).read_bytes() for n in ("tables.txt", "scatter.csv")]
        main(["eval", "--out", str(run_dir)])
        assert [(run_dir / n).read_bytes() for n in ("tables.txt", "scatter.csv")] == first

    def test_tampered_data(self, run_dir, small_data, tmp_path, capsys):
        text = small_data.read_text().splitlines()
        head, row = text[0], text[5].split(",")
        row[-1] = repr(float(row[-1]) + 1e-6)
        tampered = tmp_path / "t.csv"
        tampered.write_text("\n".join([head] + text[1:5] + [",".join(row)] + text[6:]) + "\n")
        assert main(["eval", "--out", str(run_dir), "--data", str(tampered)]) == 1
        assert "ManifestMismatch" in capsys.readouterr().err

    def test_missing_model(self, tmp_path, capsys):
        assert main(["eval", "--out", str(tmp_path)]) == 1


class TestPredict:
    def test_single_number(self, run_dir, capsys):
        assert main(["predict", "--out", str(run_dir), "--N", "50000", "--R", "0.3",
                     "--Rol", "1.5"]) == 0
        out = capsys.readouterr().out.splitlines()
        assert len(out) == 1
        float(out[0])

    def test_ca_equals_unit_ratio(self, run_dir, capsys):
        main(["predict", "--model", str(run_dir / "model.txt"), "--N", "1e5", "--R", "0.1",
              "--Rol", "CA"])
        main(["predict", "--model", str(run_dir / "model.txt"), "--N", "1e5", "--R", "0.1",
              "--Rol", "1.0"])
        a, b = capsys.readouterr().out.splitlines()
        assert a == b

    @pytest.mark.parametrize("args", [["--R", "1.2", "--Rol", "CA"], ["--R", "0.1", "--Rol", "0.5"],
                                      ["--R", "0.1", "--Rol", "big"]])
    def test_invalid_condition(self, run_dir, args, capsys):
        assert main(["predict", "--out", str(run_dir), "--N", "10"] + args) == 2

    def test_argparse_usage_error(self):
        with pytest.raises(SystemExit) as err:
            main(["predict", "--N", "10"])
        assert err.value.code == 2


def test_module_entry_point(tmp_path):
    out = tmp_path / "x.csv"
    proc = subprocess.run([sys.executable, "-m", "fatigue_mlp", "gen-synthetic", "--out", str(out),
                           "--points", "10"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.read_text().startswith("series_id,R,R_ol,N,a_mm\n")
