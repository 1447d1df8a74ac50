"""Config handling, full runs, and the rendering-service client."""

import json
import socket

import pytest

from conftest import DATA
from semtex.errors import (
    ConfigInvalidError,
    ServiceRejectedError,
    ServiceUnreachableError,
)
from semtex.glossary import builtin_glossary
from semtex.mockserver import start_server
from semtex.pipeline import (
    PipelineConfig,
    expand_inputs,
    load_config,
    replace_text,
    request_mathml,
    run_pipeline,
    validate_config,
    verify_render,
)


def write_config(tmp_path, **overrides):
    cfg = {"input": str(DATA / "kls_mini.tex")}
    cfg.update(overrides)
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg))
    return p


# -------------------------------------------------------------------- config


def test_load_config_full(tmp_path):
    p = write_config(
        tmp_path,
        input=[str(DATA / "kls_mini.tex"), str(DATA / "mixed_errors.tex")],
        bibliography=str(DATA / "bib.json"),
        output="out.xml",
        report="report.txt",
        corpus_prefix="KLS",
        citation_key="KLS",
        keywords=["definition"],
        introducers=["where"],
        endpoint="http://127.0.0.1:9999/",
        workers=4,
        siteinfo={"sitename": "Test", "timestamp": "2011-02-03T00:00:00Z"},
    )
    cfg = load_config(p)
    assert [q.name for q in cfg.inputs] == ["kls_mini.tex", "mixed_errors.tex"]
    assert cfg.bibliography_path == DATA / "bib.json"
    assert cfg.output_path.name == "out.xml"
    assert cfg.keywords == ("definition",)
    assert cfg.introducers == ("where",)
    assert cfg.workers == 4
    assert cfg.siteinfo.sitename == "Test"
    assert cfg.siteinfo.dbname == "drmf"  # untouched fields keep defaults


def test_load_config_single_input_string(tmp_path):
    cfg = load_config(write_config(tmp_path))
    assert len(cfg.inputs) == 1


@pytest.mark.parametrize(
    "overrides",
    [
        {"no_such_key": 1},
        {"workers": 0},
        {"workers": "2"},
        {"keywords": "definition"},
        {"output": 7},
        {"siteinfo": {"sitename": "x", "nope": "y"}},
        {"siteinfo": "x"},
    ],
)
def test_load_config_rejects_bad_values(tmp_path, overrides):
    with pytest.raises(ConfigInvalidError):
        load_config(write_config(tmp_path, **overrides))


def test_load_config_rejects_bad_json(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text("{not json")
    with pytest.raises(ConfigInvalidError):
        load_config(p)
    p.write_text('["a"]')
    with pytest.raises(ConfigInvalidError):
        load_config(p)


def test_validate_config_checks_paths(tmp_path):
    cfg = PipelineConfig(inputs=[tmp_path / "missing.tex"])
    with pytest.raises(ConfigInvalidError):
        validate_config(cfg)


@pytest.mark.parametrize("endpoint", ["ftp://x/", "127.0.0.1:8080", "http://"])
def test_validate_config_checks_endpoint(endpoint):
    cfg = PipelineConfig(inputs=[DATA / "kls_mini.tex"], endpoint=endpoint)
    with pytest.raises(ConfigInvalidError):
        validate_config(cfg)


def test_expand_inputs(tmp_path):
    (tmp_path / "b.tex").write_text("")
    (tmp_path / "a.tex").write_text("")
    (tmp_path / "c.txt").write_text("")
    got = expand_inputs([tmp_path, DATA / "bib.json"])
    assert [p.name for p in got] == ["a.tex", "b.tex", "bib.json"]


# ----------------------------------------------------------------- full runs


def mini_config(**kw):
    base = dict(
        inputs=[DATA / "kls_mini.tex"],
        bibliography_path=DATA / "bib.json",
    )
    base.update(kw)
    return PipelineConfig(**base)


def test_run_pipeline_mini(tmp_path):
    cfg = mini_config(
        output_path=tmp_path / "dump.xml", report_path=tmp_path / "report.txt"
    )
    result = run_pipeline(cfg)
    assert result.exit_code == 0
    assert result.failures == []
    assert len(result.pages) == 28
    assert len(result.defs) == 2
    assert (tmp_path / "dump.xml").read_text() == result.dump
    assert (tmp_path / "report.txt").read_text() == result.report
    assert result.report.startswith("pages: 28\n")


def test_golden_outputs():
    result = run_pipeline(mini_config(), write=False)
    assert result.dump == (DATA / "golden_dump.xml").read_text()
    assert result.report == (DATA / "golden_report.txt").read_text()


def test_run_pipeline_is_deterministic():
    a = run_pipeline(mini_config(), write=False)
    b = run_pipeline(mini_config(), write=False)
    assert a.dump == b.dump
    assert a.report == b.report


def test_worker_count_does_not_change_output():
    inputs = [DATA / "kls_mini.tex", DATA / "mixed_errors.tex"]
    one = run_pipeline(PipelineConfig(inputs=inputs, bibliography_path=DATA / "bib.json", workers=1), write=False)
    eight = run_pipeline(PipelineConfig(inputs=inputs, bibliography_path=DATA / "bib.json", workers=8), write=False)
    assert one.dump == eight.dump
    assert one.report == eight.report


def test_row_failure_keeps_run_alive():
    result = run_pipeline(
        PipelineConfig(inputs=[DATA / "mixed_errors.tex"], bibliography_path=DATA / "bib.json"),
        write=False,
    )
    assert result.exit_code == 0
    assert [f.id for f in result.formulae] == ["e.1", "e.3"]
    assert len(result.failures) == 1
    assert result.failures[0][0] == "e.2"
    assert "failures: 1" in result.report


def test_file_failure_sets_exit_code():
    result = run_pipeline(
        PipelineConfig(inputs=[DATA / "broken.tex"], bibliography_path=DATA / "bib.json"),
        write=False,
    )
    assert result.exit_code == 1
    assert result.pages == []
    assert "UnbalancedGroup" in result.failures[0][1]


def test_multiple_files_prefix_ids():
    inputs = [DATA / "kls_mini.tex", DATA / "mixed_errors.tex"]
    result = run_pipeline(
        PipelineConfig(inputs=inputs, bibliography_path=DATA / "bib.json"), write=False
    )
    ids = [f.id for f in result.formulae]
    assert "kls_mini:1.1.1" in ids
    assert "mixed_errors:e.1" in ids
    assert result.failures[0][0] == "mixed_errors:e.2"
    titles = [p.title for p in result.pages]
    assert len(titles) == len(set(titles)) == 30


def test_empty_input_list():
    result = run_pipeline(PipelineConfig(), write=False)
    assert result.exit_code == 0
    assert result.report.startswith("pages: 0\n")


def test_default_bibliography_is_stub():
    result = run_pipeline(PipelineConfig(inputs=[DATA / "mixed_errors.tex"]), write=False)
    assert result.exit_code == 0
    assert "Equation (e.1) of" in result.pages[0].wikitext


# ------------------------------------------------------------- text replace


def test_replace_text_touches_every_span(glossary):
    source = "Let $\\Gamma(z)$ satisfy\n\\[ \\sin z = y \\]\ndone."
    out, stats = replace_text(source, glossary)
    assert "\\EulerGamma@{z}" in out
    assert "\\sin@@{z}" in out
    assert out.startswith("Let $") and out.endswith("done.")
    assert stats.formulae == 2
    assert stats.total == 2
    assert stats.formulae_touched == 2


def test_replace_text_without_math_is_identity(glossary):
    source = "no math here at all\n"
    assert replace_text(source, glossary) == (source, stats_zero())


def stats_zero():
    from semtex.engine import ReplacementStats

    return ReplacementStats.combine([])


# ------------------------------------------------------------ render client


@pytest.fixture(scope="module")
def mock_endpoint():
    server = start_server()
    port = server.server_address[1]
    yield f"http://127.0.0.1:{port}/"
    server.shutdown()


def test_request_mathml(mock_endpoint):
    rendered = request_mathml(r"\EulerGamma@{z}", mock_endpoint)
    assert rendered.presentation.startswith("<math")
    assert 'xmlns="http://www.w3.org/1998/Math/MathML"' in rendered.presentation
    assert r"\EulerGamma@{z}" in rendered.presentation
    assert "<csymbol>" in rendered.content


def test_request_mathml_rejected(mock_endpoint):
    with pytest.raises(ServiceRejectedError):
        request_mathml("   ", mock_endpoint)


def test_request_mathml_unreachable():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    with pytest.raises(ServiceUnreachableError):
        request_mathml("x", f"http://127.0.0.1:{port}/")


def test_verify_render_ok(mock_endpoint, mini_extraction):
    sample = mini_extraction.formulae[:3]
    got = verify_render(sample, mock_endpoint)
    assert got == [(f.id, "ok") for f in sample]


def test_verify_render_degrades_to_warnings(mini_extraction):
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    got = verify_render(mini_extraction.formulae[:2], f"http://127.0.0.1:{port}/")
    assert len(got) == 2
    assert all(status.startswith("warning: service unreachable") for _, status in got)
