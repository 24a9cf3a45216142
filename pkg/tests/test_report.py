import json
import math
from types import SimpleNamespace

import numpy as np
import pytest

from crisis_netkit import cli
from crisis_netkit.graph import SnapshotStore
from crisis_netkit.ingest import Kind, day_partition, parse_events, write_events_jsonl
from crisis_netkit.report import (
    StudyConfig,
    _decimate,
    _parse_start,
    report_to_bytes,
    run_pipeline,
    write_report,
)
from crisis_netkit.synth import ScenarioConfig, gen_scenario, write_scenario

from conftest import START, ev


@pytest.fixture(scope="module")
def scenario(tmp_path_factory):
    root = tmp_path_factory.mktemp("scenario")
    config = ScenarioConfig(days=3, n_users=400, seed=29)
    events, ledger = gen_scenario(config)
    events_path = root / "events.jsonl"
    ledger_path = root / "events.ledger.json"
    write_scenario(events, ledger, str(events_path), str(ledger_path))
    return SimpleNamespace(
        config=config,
        events=events,
        ledger=ledger,
        events_path=str(events_path),
        ledger_path=str(ledger_path),
    )


def study_config(scenario, **overrides) -> StudyConfig:
    cfg = StudyConfig(
        start=scenario.config.start,
        days=scenario.config.days,
        replicates=100,
        top_locations=5,
        seed=1,
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


@pytest.fixture(scope="module")
def study(scenario):
    cfg = study_config(scenario)
    report = run_pipeline(scenario.events_path, cfg)
    return SimpleNamespace(cfg=cfg, report=report)


# -- shape and bookkeeping -------------------------------------------------------

def test_report_shape_and_clean_sections(scenario, study):
    report = study.report
    assert report["schema_version"] == 1
    assert report["study"]["days"] == 3
    assert len(report["days"]) == 3
    assert report["skipped_sections"] == []

    ingest = report["ingest"]
    assert ingest["parsed"] == len(scenario.events)
    assert ingest["malformed"] == 0
    assert ingest["filtered_out"] == 0
    assert ingest["out_of_window"] == 0
    assert ingest["events"] == len(scenario.events)


def test_graph_sections_match_store(scenario, study):
    records, _ = parse_events(scenario.events_path)
    buckets = day_partition(records, scenario.config.start)
    store = SnapshotStore.from_buckets(buckets)
    for day, row in enumerate(study.report["days"]):
        graph = row["graph"]
        assert graph["nodes"] == store.nodes_at(day)
        assert graph["edges"] == store.edges_at(day)
        assert graph["total_weight"] == int(store.weights_at(day).sum())
    final = study.report["days"][-1]["graph"]
    assert final["total_weight"] == scenario.ledger["totals"]["communications"]


def test_cross_section_consistency(study):
    for row in study.report["days"]:
        graph, influence = row["graph"], row["influence"]
        assert influence["nodes"] == graph["nodes"]
        assert row["activity"]["total_users"] == graph["active_users"]
        assert row["flows"]["influential_users"] == math.ceil(
            0.02 * graph["nodes"]
        )
        assert row["structures"]["classified_users"] <= graph["nodes"]
        total = sum(row["flows"][key] for key in ("ii", "io", "oi", "oo"))
        assert total == pytest.approx(100.0)


def test_memory_matches_ledger(scenario, study):
    for row, truth in zip(study.report["days"], scenario.ledger["memory"]):
        memory = row["memory"]
        assert memory["new_pairs"] == truth["new_pairs"]
        assert memory["active_pairs"] == truth["active_pairs"]
        assert memory["ratio"] == truth["ratio"]
    assert study.report["days"][0]["memory"]["ratio"] == 1.0


def test_weight_sections_internally_consistent(study):
    for row in study.report["days"]:
        section = row["weights"]
        histogram = {int(k): v for k, v in section["histogram"].items()}
        assert sum(histogram.values()) == section["n_edges"] == row["graph"]["edges"]
        assert sum(w * c for w, c in histogram.items()) == row["graph"]["total_weight"]
        assert section["max"] == max(histogram)
        spelled = np.repeat(
            np.fromiter(histogram.keys(), dtype=np.int64),
            np.fromiter(histogram.values(), dtype=np.int64),
        )
        assert section["median"] == pytest.approx(float(np.median(spelled)))
        assert section["variance"] == pytest.approx(float(spelled.var()))


def test_activity_sections_complete(study):
    for row in study.report["days"]:
        kinds = row["activity"]["kinds"]
        assert set(kinds) == {"post", "retweet", "reply", "quote"}
        for name, cell in kinds.items():
            assert "skipped" not in cell, (row["day"], name)
            assert cell["n"] >= 10
            assert len(cell["kde"]) <= 512
            assert len(cell["qq"]) <= 512
            booked = cell["n"] + cell["excluded_low"] + cell["excluded_high"]
            assert booked == row["activity"]["total_users"]


def test_influence_sections_sane(study):
    for row in study.report["days"]:
        influence = row["influence"]
        assert influence["alpha"] > 1.0
        assert 0.0 <= influence["ks"] <= 1.0
        assert 0.0 <= influence["p_value"] <= 1.0
        assert influence["n_tail"] >= 50
        assert influence["x_min_raw"] > 0.0
        assert len(influence["ccdf"]) <= 512
        assert influence["replicates"] == 100


# -- spatial sections against the ledger ------------------------------------------

def test_spatial_section_matches_ledger(scenario, study):
    spatial = study.report["spatial"]
    assert not spatial["shortfall"]
    truth_coords = {
        row["name"]: (row["lat"], row["lon"]) for row in scenario.ledger["locations"]
    }
    names = [row["name"] for row in spatial["locations"]]
    assert set(names) == set(truth_coords)
    for row in spatial["locations"]:
        lat, lon = truth_coords[row["name"]]
        assert row["lat"] == pytest.approx(lat)
        assert row["lon"] == pytest.approx(lon)

    counts = {}
    for event in scenario.events:
        counts[event.profile_location] = counts.get(event.profile_location, 0) + 1
    for row in spatial["locations"]:
        assert row["tweet_count"] == counts[row["name"]]

    cities = [row["name"] for row in scenario.ledger["locations"]]
    truth = scenario.ledger["freq_matrix"]
    got = spatial["freq_matrix"]
    for r, rname in enumerate(names):
        for c, cname in enumerate(names):
            assert got[r][c] == truth[cities.index(rname)][cities.index(cname)]

    assert len(spatial["freq_curve"]["bins"]) == study.cfg.curve_bins
    assert spatial["freq_curve"]["same_location"] is not None
    for i, j, width in spatial["surrogate_freq"]:
        assert 0 <= i < 5 and 0 <= j < 5
        assert 0.5 <= width <= 5.0


def test_response_section_matches_ledger(scenario, study):
    response = study.report["response"]
    assert response["samples"] == scenario.ledger["totals"]["communications"]
    assert response["unresolved"] == 0
    assert response["clock_anomalies"] == 0

    names = [row["name"] for row in study.report["spatial"]["locations"]]
    cities = [row["name"] for row in scenario.ledger["locations"]]
    truth_median = scenario.ledger["delay"]["pair_median"]
    truth_count = scenario.ledger["delay"]["pair_count"]
    for r, rname in enumerate(names):
        for c, cname in enumerate(names):
            i, j = cities.index(rname), cities.index(cname)
            cell = response["resp_matrix"][r][c]
            if truth_count[i][j] == 0:
                assert cell is None
            else:
                assert cell == truth_median[i][j]


# -- determinism -------------------------------------------------------------------

def test_pipeline_is_deterministic(scenario, study):
    again = run_pipeline(scenario.events_path, study_config(scenario))
    assert report_to_bytes(again) == report_to_bytes(study.report)


def test_window_clipping_counts(scenario):
    cfg = study_config(scenario, days=2)
    report = run_pipeline(scenario.events_path, cfg)
    assert len(report["days"]) == 2
    assert report["ingest"]["out_of_window"] > 0
    kept = report["ingest"]["events"]
    assert kept + report["ingest"]["out_of_window"] == len(scenario.events)


# -- degraded inputs ----------------------------------------------------------------

def _tiny_stream():
    rows = []
    for i in range(8):
        rows.append(ev(f"p{i}", f"u{i}", Kind.POST, START + 60 * i, loc="houston, tx"))
    rows.append(
        ev("r0", "u1", Kind.RETWEET, START + 900, target="u0", target_event="p0",
           loc="houston, tx")
    )
    rows.append(
        ev("r1", "u2", Kind.RETWEET, START + 960, target="u0", target_event="p0",
           loc="houston, tx")
    )
    return rows


def test_tiny_stream_degrades_to_skips(tmp_path):
    path = tmp_path / "tiny.jsonl"
    write_events_jsonl(_tiny_stream(), str(path))
    report = run_pipeline(str(path), StudyConfig(replicates=100))
    day = report["days"][0]
    assert "skipped" in day["influence"]
    assert "skipped" in day["flows"]
    for cell in day["activity"]["kinds"].values():
        assert "skipped" in cell
    assert day["memory"]["ratio"] == 1.0
    assert any("influence" in entry for entry in report["skipped_sections"])
    # spatial still works: one location, huge shortfall
    assert report["spatial"]["shortfall"] is True
    assert report["response"]["samples"] == 2


def test_missing_locations_skip_spatial(tmp_path):
    rows = [ev(f"p{i}", f"u{i}", Kind.POST, START + i) for i in range(6)]
    path = tmp_path / "noloc.jsonl"
    write_events_jsonl(rows, str(path))
    report = run_pipeline(str(path), StudyConfig(replicates=100))
    assert "skipped" in report["spatial"]
    assert "skipped" in report["response"]
    assert report["skipped_sections"]


def test_keyword_filter_removing_everything_is_fatal(tmp_path):
    rows = [ev("p0", "u0", Kind.POST, START, text="alpha beta")]
    path = tmp_path / "one.jsonl"
    write_events_jsonl(rows, str(path))
    with pytest.raises(ValueError, match="keyword filter"):
        run_pipeline(str(path), StudyConfig(keywords=("zzz",)))


def test_empty_input_is_fatal(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with pytest.raises(ValueError):
        run_pipeline(str(path), StudyConfig())


# -- config plumbing ----------------------------------------------------------------

def test_study_config_from_text():
    cfg = StudyConfig.from_text(
        "name = atlantic\n"
        "days = 4\n"
        "keywords = storm, flood\n"
        "replicates = 250\n"
        "start = 2020-01-01T00:00:00Z\n"
    )
    assert cfg.name == "atlantic"
    assert cfg.days == 4
    assert cfg.keywords == ("storm", "flood")
    assert cfg.replicates == 250
    assert cfg.start == START
    assert cfg.beta == 0.85  # untouched default


def test_study_config_rejects_unknown_key():
    with pytest.raises(ValueError, match="unknown config key"):
        StudyConfig.from_text("dayz = 4\n")


def test_parse_start_forms():
    assert _parse_start("1577836800") == START
    assert _parse_start("2020-01-01T00:00:00Z") == START
    assert _parse_start("2020-01-01T00:00:00") == START  # naive means UTC


def test_decimate_keeps_endpoints():
    arr = np.arange(4000, dtype=np.float64).reshape(2000, 2)
    out = _decimate(arr, 512)
    assert out.shape[0] <= 512
    assert out[0].tolist() == [0.0, 1.0]
    assert out[-1].tolist() == [3998.0, 3999.0]
    small = np.arange(10).reshape(5, 2)
    assert _decimate(small, 512) is small


# -- command line -------------------------------------------------------------------

def test_cli_synth_and_report_roundtrip(tmp_path, scenario, study):
    study_cfg = tmp_path / "study.kv"
    study_cfg.write_text(
        "start = {}\ndays = 3\nreplicates = 100\ntop_locations = 5\nseed = 1\n".format(
            scenario.config.start
        )
    )
    out = tmp_path / "report.json"
    code = cli.main(
        ["report", "--events", scenario.events_path,
         "--config", str(study_cfg), "--out", str(out)]
    )
    assert code == 0
    assert out.read_bytes() == report_to_bytes(study.report)


def test_cli_synth_writes_scenario(tmp_path):
    cfg = tmp_path / "scenario.kv"
    cfg.write_text("days = 1\nn_users = 40\nseed = 6\n")
    out = tmp_path / "events.jsonl"
    code = cli.main(["synth", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    assert out.exists()
    ledger = json.loads((tmp_path / "events.jsonl.ledger.json").read_text())
    assert ledger["config"]["n_users"] == 40
    records, stats = parse_events(str(out))
    assert stats.malformed == 0 and len(records) == ledger["totals"]["events"]


def test_cli_snapshot_structures_influence_chain(tmp_path, scenario):
    snap_dir = tmp_path / "snaps"
    code = cli.main(
        ["snapshot", "--events", scenario.events_path,
         "--start", str(scenario.config.start), "--out-dir", str(snap_dir)]
    )
    assert code == 0
    assert sorted(p.name for p in snap_dir.glob("*.edges.tsv")) == [
        "day_000.edges.tsv", "day_001.edges.tsv", "day_002.edges.tsv",
    ]

    structures_out = tmp_path / "structures.json"
    assert cli.main(
        ["structures", "--snapshot-dir", str(snap_dir), "--out", str(structures_out)]
    ) == 0
    rows = json.loads(structures_out.read_text())
    assert [row["day"] for row in rows] == [0, 1, 2]
    for row in rows:
        total = sum(row[key] for key in ("Con", "C_S", "Sel", "S_R", "Rec", "R_C", "CSR"))
        assert total == pytest.approx(1.0, abs=1e-12)

    influence_out = tmp_path / "influence.json"
    assert cli.main(
        ["influence", "--snapshot-dir", str(snap_dir),
         "--replicates", "100", "--out", str(influence_out)]
    ) == 0
    rows = json.loads(influence_out.read_text())
    assert len(rows) == 3
    assert all("skipped" not in row for row in rows)


def test_cli_activity_and_ingest(tmp_path, scenario):
    activity_out = tmp_path / "activity.json"
    code = cli.main(
        ["activity", "--events", scenario.events_path,
         "--start", str(scenario.config.start), "--day", "1",
         "--out", str(activity_out)]
    )
    assert code == 0
    payload = json.loads(activity_out.read_text())
    assert payload["day"] == 1 and payload["total_users"] == 400

    keywords = tmp_path / "kw.txt"
    keywords.write_text("stormwatch\n")
    normalized = tmp_path / "normalized.jsonl"
    code = cli.main(
        ["ingest", "--input", scenario.events_path, "--keywords", str(keywords),
         "--out", str(normalized)]
    )
    assert code == 0
    records, _ = parse_events(str(normalized))
    assert len(records) == len(scenario.events)


def test_cli_spatial_exit_codes(tmp_path, scenario):
    out = tmp_path / "spatial.json"
    code = cli.main(
        ["spatial", "--events", scenario.events_path, "--top", "5", "--out", str(out)]
    )
    assert code == 0
    payload = json.loads(out.read_text())
    assert len(payload["spatial"]["locations"]) == 5

    # a stream with no usable locations is fatal for this command
    noloc = tmp_path / "noloc.jsonl"
    write_events_jsonl([ev("p0", "u0", Kind.POST, START)], str(noloc))
    code = cli.main(["spatial", "--events", str(noloc), "--out", str(tmp_path / "s2.json")])
    assert code == 1


def test_cli_report_fatal_paths(tmp_path):
    missing = tmp_path / "does-not-exist.jsonl"
    code = cli.main(["report", "--events", str(missing), "--out", str(tmp_path / "r.json")])
    assert code == 1

    bad_cfg = tmp_path / "bad.kv"
    bad_cfg.write_text("dayz = 3\n")
    some = tmp_path / "some.jsonl"
    write_events_jsonl([ev("p0", "u0", Kind.POST, START)], str(some))
    code = cli.main(
        ["report", "--events", str(some), "--config", str(bad_cfg),
         "--out", str(tmp_path / "r2.json")]
    )
    assert code == 1
