import io

import pytest

from pmcforecast.engine import EngineOutput, Event
from pmcforecast.forecast import ForecastInterval
from pmcforecast.streams import (
    EventFormatError,
    OutputWriter,
    SymbolMapper,
    load_config,
    parse_bool,
    read_events,
    write_events,
)


def test_read_positional():
    text = "# comment\na\n\nb,k1\nc,k2,1\n"
    evs = list(read_events(io.StringIO(text)))
    assert [(e.symbol, e.partition_key, e.ground_truth) for e in evs] == [
        ("a", None, None), ("b", "k1", None), ("c", "k2", True)]


def test_read_header_by_name():
    text = "ground_truth,symbol,partition_key\n0,a,x\nyes,b,y\n"
    evs = list(read_events(io.StringIO(text)))
    assert [(e.symbol, e.partition_key, e.ground_truth) for e in evs] == [
        ("a", "x", False), ("b", "y", True)]


def test_write_read_round_trip():
    evs = [Event("a", "k", None, True), Event("b", None, None, None)]
    buf = io.StringIO()
    write_events(evs, buf)
    back = list(read_events(io.StringIO(buf.getvalue())))
    assert [(e.symbol, e.partition_key, e.ground_truth) for e in back] == [
        ("a", "k", True), ("b", None, None)]


def test_mapper():
    mapper = SymbolMapper(["up", "down"], {"INC": "up", "DEC": "down"}, "skip")
    evs = list(read_events(io.StringIO("INC\nDEC\nFLAT\nup\n"), mapper))
    assert [e.symbol for e in evs] == ["up", "down", "up"]
    assert mapper.rejected == 1
    with pytest.raises(EventFormatError):
        list(read_events(io.StringIO("FLAT\n"), SymbolMapper(["up"])))
    with pytest.raises(ValueError):
        SymbolMapper(["up"], {"X": "sideways"})


def test_parse_bool():
    assert parse_bool("TRUE") is True and parse_bool("n") is False and parse_bool("") is None
    with pytest.raises(EventFormatError):
        parse_bool("maybe")


def out(state, fc=None, match=False, key=None, index=0):
    return EngineOutput(key, index, "a", state, fc, match)


def test_output_dedupe():
    iv = ForecastInterval(1, 2, 0.5)
    buf = io.StringIO()
    w = OutputWriter(buf, dedupe=True)
    for i, o in enumerate([out(0, iv), out(0, iv), out(1, iv), out(0, iv), out(3, None, True),
                           out(3, None, True)]):
        w.write(EngineOutput(o.partition_key, i, o.symbol, o.state, o.forecast, o.is_match))
    lines = buf.getvalue().splitlines()
    assert len(lines) == 1 + 5
    assert lines[0].startswith("partition,index")


def test_output_sweep_column():
    buf = io.StringIO()
    w = OutputWriter(buf, p_fc=0.3)
    w.write(out(0))
    w.reset(0.7)
    w.write(out(0))
    rows = buf.getvalue().splitlines()
    assert rows[0].startswith("p_fc,") and rows[1].startswith("0.3,") and rows[2].startswith("0.7,")


def test_config_overrides_and_paths(tmp_path):
    (tmp_path / "events.csv").write_text("a\n")
    cfg_path = tmp_path / "run.yaml"
    cfg_path.write_text("pattern: a;b\nalphabet: [a, b]\np_fc: 0.4\ninput: events.csv\n")
    cfg = load_config(str(cfg_path), {"order": 2, "ms": None})
    assert cfg.order == 2 and cfg.p_fc == [0.4] and cfg.ms is None
    assert cfg.input == str(tmp_path / "events.csv")
    assert [e.symbol for e in cfg.read_events()] == ["a"]


@pytest.mark.parametrize(
    "body",
    [
        "pattern: a\nalphabet: [a]\nbogus: 1\n",
        "pattern: a\nalphabet: [a]\np_fc: []\n",
        "pattern: a\nalphabet: [a]\np_fc: [0.5, 1.5]\n",
        "pattern: a\nalphabet: [a]\ninput: missing.csv\n",
        "alphabet: [a]\n",
    ],
)
def test_config_rejects(tmp_path, body):
    path = tmp_path / "c.yaml"
    path.write_text(body)
    with pytest.raises((ValueError, FileNotFoundError)):
        load_config(str(path))


def test_config_generator_file(tmp_path):
    (tmp_path / "g.json").write_text(
        '{"alphabet": ["a"], "order": 0, "seed": 1, "length": 4, "table": {"": [1.0]}}'
    )
    path = tmp_path / "c.yaml"
    path.write_text("pattern: a\nalphabet: [a]\ngenerator: g.json\n")
    assert load_config(str(path)).generator.length == 4
