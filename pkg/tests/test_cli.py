import numpy as np
import pytest

from msfkit import cli
from msfkit.errors import ConfigError

from conftest import TOY_CONFIG


def run(argv):
    return cli.main(argv)


def test_load_config_defaults(tmp_path):
    cfg_file = tmp_path / "min.ini"
    cfg_file.write_text("[experiment]\nrepetitions = 2\n", encoding="utf-8")
    cfg = cli.load_config(cfg_file)
    assert cfg.scales.sides == (128, 192, 256)
    assert cfg.pyramid.levels == (1, 2, 4)
    assert cfg.kernel.kind == "linear"
    assert cfg.normalize is True
    assert cfg.repetitions == 2
    assert cfg.methods() == ["single-128", "single-192", "single-256", "sv", "mkl"]


def test_unknown_key_and_section_are_config_errors(tmp_path):
    bad_key = tmp_path / "bad.ini"
    bad_key.write_text("[svm]\ncee = 1.0\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="cee"):
        cli.load_config(bad_key)
    bad_section = tmp_path / "bads.ini"
    bad_section.write_text("[svn]\nc = 1.0\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="svn"):
        cli.load_config(bad_section)


def test_pyramid_finer_than_feature_map_names_scale(tmp_path):
    cfg_file = tmp_path / "fine.ini"
    cfg_file.write_text(
        "[scales]\nsides = 32 48\n\n[pyramid]\nlevels = 1 2 16\n\n"
        "[extractor]\nseed = 1\nlayers = 4:3:2:2\n",
        encoding="utf-8",
    )
    with pytest.raises(ConfigError, match="scale 32"):
        cli.load_config(cfg_file)


def test_gaussian_kernel_requires_gamma(tmp_path):
    cfg_file = tmp_path / "g.ini"
    cfg_file.write_text("[kernel]\nkind = gaussian\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="gamma"):
        cli.load_config(cfg_file)
    cfg_file.write_text("[kernel]\nkind = gaussian\ngamma = 0.5\n", encoding="utf-8")
    assert cli.load_config(cfg_file).kernel.gamma == 0.5


def test_extract_command_prints_per_scale_summary(toy_corpus, capsys):
    manifest, config = toy_corpus
    assert run(["extract", "--config", str(config), "--manifest", str(manifest)]) == 0
    out = capsys.readouterr().out
    assert "scale=32" in out and "scale=48" in out
    assert "descriptor_length=126" in out
    assert "samples=18" in out


def test_bad_manifest_line_exits_3_with_line_number(toy_corpus, capsys, tmp_path):
    _, config = toy_corpus
    bad = tmp_path / "bad.tsv"
    bad.write_text("vert_0.pgm\tvert\nnot_there.pgm\tvert\n", encoding="utf-8")
    assert run(["extract", "--config", str(config), "--manifest", str(bad)]) == 3
    err = capsys.readouterr().err
    assert "line 2" in err


def test_unknown_config_key_exits_2(toy_corpus, capsys, tmp_path):
    manifest, _ = toy_corpus
    bad = tmp_path / "bad.ini"
    bad.write_text(TOY_CONFIG + "\n[svm]\nbox = 2\n", encoding="utf-8")
    assert run(["extract", "--config", str(bad), "--manifest", str(manifest)]) == 2
    assert "box" in capsys.readouterr().err


def test_gram_command_writes_normalized_gram_files(toy_corpus, capsys, tmp_path):
    from msfkit import dataio

    manifest, config = toy_corpus
    out_dir = tmp_path / "grams"
    assert run([
        "gram", "--config", str(config), "--manifest", str(manifest), "--out", str(out_dir),
    ]) == 0
    printed = capsys.readouterr().out
    assert printed.count("diag_min=1.000000") == 2
    for side in (32, 48):
        dims, vals = dataio.read_tensor(out_dir / f"gram_{side}.tens")
        assert dims == (18, 18)
        assert np.allclose(np.diag(vals), 1.0, atol=1e-6)


def test_empty_manifest_exits_3(toy_corpus, tmp_path, capsys):
    _, config = toy_corpus
    empty = tmp_path / "empty.tsv"
    empty.write_text("# nothing here\n", encoding="utf-8")
    assert run(["gram", "--config", str(config), "--manifest", str(empty),
                "--out", str(tmp_path / "g")]) == 3


def test_exp_command_emits_all_tables(toy_corpus, tmp_path):
    manifest, config = toy_corpus
    out_dir = tmp_path / "report"
    assert run([
        "exp", "--config", str(config), "--manifest", str(manifest),
        "--out", str(out_dir), "--jobs", "2",
    ]) == 0

    oa_lines = (out_dir / "oa.tsv").read_text().splitlines()
    assert oa_lines[0] == "method\t3"
    assert [l.split("\t")[0] for l in oa_lines[1:]] == ["single-32", "single-48", "sv", "mkl"]
    for line in oa_lines[1:]:
        assert "±" in line.split("\t")[1]

    for method in ("single-32", "single-48", "sv", "mkl"):
        counts = (out_dir / f"confusion_{method}_3.tsv").read_text().splitlines()
        assert len(counts) == 4  # header + 3 classes
        rates = (out_dir / f"confusion_{method}_3_rates.tsv").read_text().splitlines()
        for row in rates[1:]:
            vals = [float(v) for v in row.split("\t")[1:]]
            assert sum(vals) == pytest.approx(1.0, abs=1e-6)

    weight_lines = (out_dir / "mkl_weights.tsv").read_text().splitlines()
    assert weight_lines[0] == "train_count\tclass\td_32\td_48"
    assert len(weight_lines) == 1 + 3
    for row in weight_lines[1:]:
        ws = [float(v) for v in row.split("\t")[2:]]
        assert sum(ws) == pytest.approx(1.0, abs=0.01)


def test_exp_outputs_are_bit_reproducible(toy_corpus, tmp_path):
    manifest, config = toy_corpus
    first = tmp_path / "r1"
    second = tmp_path / "r2"
    for out_dir, jobs in ((first, "1"), (second, "3")):
        assert run([
            "exp", "--config", str(config), "--manifest", str(manifest),
            "--out", str(out_dir), "--jobs", jobs,
        ]) == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_exp_table_shape_with_three_counts_and_scales(toy_corpus, tmp_path):
    manifest, _ = toy_corpus
    config = tmp_path / "wide.ini"
    config.write_text(
        TOY_CONFIG.replace("sides = 32 48", "sides = 32 48 64").replace(
            "train_counts = 3", "train_counts = 2 3 4"
        ),
        encoding="utf-8",
    )
    out_dir = tmp_path / "wide_report"
    assert run(["exp", "--config", str(config), "--manifest", str(manifest),
                "--out", str(out_dir)]) == 0
    lines = (out_dir / "oa.tsv").read_text().splitlines()
    assert lines[0].split("\t") == ["method", "2", "3", "4"]
    methods = [l.split("\t")[0] for l in lines[1:]]
    assert methods == ["single-32", "single-48", "single-64", "sv", "mkl"]
    assert all(len(l.split("\t")) == 4 for l in lines[1:])
    weights = (out_dir / "mkl_weights.tsv").read_text().splitlines()
    assert len(weights) == 1 + 3 * 3  # 3 counts x 3 classes


def test_exp_r1_prints_zero_std(toy_corpus, tmp_path):
    manifest, config = toy_corpus
    solo = tmp_path / "solo.ini"
    solo.write_text(TOY_CONFIG.replace("repetitions = 2", "repetitions = 1"), encoding="utf-8")
    out_dir = tmp_path / "r1out"
    assert run(["exp", "--config", str(solo), "--manifest", str(manifest),
                "--out", str(out_dir)]) == 0
    body = (out_dir / "oa.tsv").read_text()
    assert "±0.00" in body


def test_exp_diagnose_scores_training_set(toy_corpus, tmp_path):
    manifest, config = toy_corpus
    out_dir = tmp_path / "diag"
    assert run(["exp", "--config", str(config), "--manifest", str(manifest),
                "--out", str(out_dir), "--diagnose"]) == 0
    for line in (out_dir / "oa.tsv").read_text().splitlines()[1:]:
        assert line.split("\t")[1] == "100.00±0.00"
