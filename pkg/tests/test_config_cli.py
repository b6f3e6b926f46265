import filecmp
import json
import os

import numpy as np
import pytest

from brennan.cli import EXIT_CONFIG, EXIT_OK, EXIT_STAGE, main
from brennan.config import OUTPUT_ENV, PipelineConfig, load_config, write_config
from brennan.errors import ConfigError, MissingArtifact, StageFailed
from brennan.pipeline import MANIFEST, STAGES, derived_seed, read_manifest, run_stage

SMALL = [
    "--n-vertices", "40", "--max-word-length", "8", "--cluster-size", "5", "--cluster-n", "30",
    "--samples", "60", "--max-n", "8", "--n-min", "4",
]


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run1")
    assert main(["full", "-o", str(out), *SMALL]) == EXIT_OK
    return out


def test_defaults_validate():
    cfg = PipelineConfig().validate()
    assert cfg.polygon.n == 300 and cfg.series.max_n == 14 and cfg.fit.max_radius == 0.9


def test_config_file_and_overrides(tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    path = tmp_path / "c.ini"
    path.write_text("[run]\nseed = 5\n[polygon]\nn = 80\n[series]\np_list = 3, 4.5\nbracket = 4 7\n")
    cfg = load_config(path)
    assert cfg.seed == 5 and cfg.polygon.n == 80
    assert cfg.series.p_list == (3.0, 4.5) and cfg.series.bracket == (4.0, 7.0)
    assert cfg.with_overrides(polygon__n=None, fit__samples=99).fit.samples == 99
    write_config(cfg, tmp_path / "back.ini")
    assert load_config(tmp_path / "back.ini") == cfg


def test_env_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert load_config().output_dir == str(tmp_path / "env")


@pytest.mark.parametrize(
    "text",
    ["[bogus]\nx = 1\n", "[polygon]\nvertices = 3\n", "[polygon]\nn = many\n", "[fit]\nmax_radius = 2\n"],
)
def test_bad_config(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path).validate()


def test_digest_ignores_output_dir():
    a = PipelineConfig()
    assert a.digest() == a.with_overrides(output_dir="elsewhere").digest()
    assert a.digest() != a.with_overrides(seed=1).digest()


def test_derived_seed():
    assert derived_seed(0, 1, 2) == derived_seed(0, 1, 2)
    assert derived_seed(0, 1, 2) != derived_seed(0, 2, 1)


def test_cli_config_errors(tmp_path, capsys):
    assert main(["shell-sums", "-o", str(tmp_path), "--max-n", "20"]) == EXIT_CONFIG
    assert main(["shell-sums", "-o", str(tmp_path), "--max-n", "5", "--n-min", "4"]) == EXIT_CONFIG
    assert main(["shell-sums", "-c", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_artifact(tmp_path):
    cfg = PipelineConfig(output_dir=str(tmp_path))
    with pytest.raises(StageFailed) as info:
        run_stage("solve-map", cfg)
    assert isinstance(info.value.__cause__, MissingArtifact)
    rec = read_manifest(tmp_path)[-1]
    assert rec["status"] == "failed" and "MissingArtifact" in rec["error"]
    assert main(["fit-generators", "-o", str(tmp_path)]) == EXIT_STAGE


def test_trivial_mode(tmp_path, capsys):
    out = str(tmp_path)
    assert main(["shell-sums", "-o", out, "--trivial", "--p", "3", "--p", "7", "--max-n", "10"]) == EXIT_OK
    t3 = np.genfromtxt(tmp_path / "shell_sums_p3.csv", delimiter=",", names=True)
    t7 = np.genfromtxt(tmp_path / "shell_sums_p7.csv", delimiter=",", names=True)
    np.testing.assert_allclose(t3["S_n"], t7["S_n"], rtol=1e-12)
    # no sign change without a homomorphism
    assert main(["p-star", "-o", out, "--trivial", "--p", "3", "--p", "7", "--max-n", "10"]) == EXIT_STAGE
    assert "BadBracket" in capsys.readouterr().err


def test_full_small_run(small_run):
    recs = read_manifest(small_run)
    assert [r["stage"] for r in recs] == list(STAGES)
    assert all(r["status"] == "ok" and r["seed"] == 0 for r in recs)
    assert len({r["config_hash"] for r in recs}) == 1
    for r in recs:
        assert {"numpy", "scipy", "numba", "python"} <= set(r["versions"])
        for a in r["artifacts"]:
            assert (small_run / a).is_file()
    p = json.loads((small_run / "p_star.json").read_text())
    lo, hi = p["bracket"]
    assert hi - lo <= 0.02 and p["slopes"][repr(lo)] < 0 < p["slopes"][repr(hi)]


def test_stage_rerun_from_artifacts(small_run, tmp_path):
    # a later stage can be rerun alone from the saved artifacts
    cfg = load_config().with_overrides(
        output_dir=str(small_run), polygon__n=40, polygon__max_word_length=8, polygon__cluster_size=5,
        polygon__cluster_n=30, fit__samples=60, series__max_n=8, series__n_min=4,
    )
    before = (small_run / "shell_sums_p4.csv").read_bytes()
    run_stage("shell-sums", cfg)
    assert (small_run / "shell_sums_p4.csv").read_bytes() == before


def test_byte_identical_reruns(small_run, tmp_path):
    out = tmp_path / "run2"
    assert main(["full", "-o", str(out), *SMALL]) == EXIT_OK
    names = sorted(
        os.path.relpath(os.path.join(d, f), small_run)
        for d, _, fs in os.walk(small_run) for f in fs if f != MANIFEST
    )
    assert len(names) > 20
    _, mismatch, errors = filecmp.cmpfiles(small_run, out, names, shallow=False)
    assert mismatch == [] and errors == []
