import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from jobreco.core import InvalidParams, RecordError, Surface
from jobreco.experiment import (EmptyArm, ExperimentConfig, OutcomeLog, OutcomeRecord, assign,
                                ctr, daily_ctr, relative_decrease, relative_increase, report,
                                significance_mark, stable_hash)
from jobreco.strategies import StrategyId

DAY = 86_400
T = 1_700_006_400  # midnight UTC


def cfg(**kw):
    base = dict(experiment_id="e", surface="similar_jobs", arm_a="CBF", arm_b="LAST")
    base.update(kw)
    return ExperimentConfig(**base)


def rec(arm, items=3, clicks=0, t=T, latency=10.0, user="u", exp="e"):
    ids = [f"j{i}" for i in range(items)]
    return OutcomeRecord(exp, arm, user, ids, t, latency, ids[:clicks])


class TestConfig:
    def test_defaults_and_roundtrip(self):
        c = cfg()
        assert c.salt == "e" and c.surface is Surface.SIMILAR_JOBS
        assert ExperimentConfig.from_dict(c.to_dict()) == c

    @pytest.mark.parametrize("kw", [
        dict(arm_b="CBF"),
        dict(arm_b="CF"),
        dict(surface="homepage"),
        dict(arm_a="NOPE"),
        dict(experiment_id=""),
        dict(hash_version="md5"),
    ])
    def test_rejects(self, kw):
        with pytest.raises(InvalidParams):
            cfg(**kw)

    def test_unknown_key(self):
        with pytest.raises(InvalidParams):
            ExperimentConfig.from_dict({"experiment_id": "e", "surface": "homepage",
                                        "arm_a": "CF", "arm_b": "BLL", "colour": 1})

    def test_aa_and_decay_variants(self):
        assert cfg(arm_a="LAST", aa_test=True).arm_a is StrategyId.LAST
        c = cfg(arm_a="BLL", arm_b="BLL", decay_a=0.6, decay_b=0.4)
        assert c.label("A") == "BLL_d=0.6" and c.strategy("B") == (StrategyId.BLL, 0.4)

    def test_running_window(self):
        c = cfg(start=10, end=20)
        assert [c.running(t) for t in (9, 10, 19, 20)] == [False, True, True, False]


class TestAssign:
    def test_deterministic(self):
        assert all(assign(f"user{i}", "s") == assign(f"user{i}", "s") for i in range(100))

    def test_parity_rule(self):
        for i in range(50):
            want = "A" if stable_hash("salt" + f"u{i}") % 2 == 0 else "B"
            assert assign(f"u{i}", "salt") == want

    def test_balanced(self):
        n = 100_000
        a = sum(assign(f"user-{i}", "exp1") == "A" for i in range(n))
        assert abs(a / n - 0.5) < 0.01

    def test_salt_changes_assignment(self):
        users = [f"u{i}" for i in range(200)]
        assert [assign(u, "x") for u in users] != [assign(u, "y") for u in users]


class TestAggregates:
    def test_ctr(self):
        assert ctr([]) == 0.0
        assert ctr([rec("A", 3, 0)]) == 0.0
        assert ctr([rec("A", 10, 1)] * 50 + [rec("A", 10, 0)] * 46 + [rec("A", 40, 3)]) == \
            pytest.approx(53 / 1000)

    def test_paper_increase(self):
        assert 100 * relative_increase(0.0229, 0.0194) == pytest.approx(18.04, abs=0.01)
        assert 100 * relative_decrease(51, 39) == pytest.approx(23.53, abs=0.01)
        assert relative_increase(0.1, 0.0) is None

    def test_marks(self):
        assert [significance_mark(p) for p in (None, 0.2, 0.05, 0.049, 0.0005, 0.0004)] == \
            ["", "", "", "*", "*", "**"]

    def test_daily_series(self):
        rs = [rec("A", 10, 1, T), rec("A", 10, 3, T + DAY - 1), rec("A", 10, 0, T + DAY)]
        assert daily_ctr(rs) == {"2023-11-15": 0.2, "2023-11-16": 0.0}

    def test_clicks_must_be_in_slate(self):
        with pytest.raises(InvalidParams):
            OutcomeRecord("e", "A", "u", ["a"], T, 1.0, ["b"])


class TestReport:
    def test_accounting(self):
        records = [rec("A", 3, 1, user="a1", latency=8), rec("A", 3, 0, user="a1", latency=10),
                   rec("B", 3, 0, user="b1", latency=20), rec("B", 3, 0, user="b2", latency=22),
                   rec("A", 3, 3, exp="other")]
        r = report(cfg(), records)
        a, b = r.arms["A"], r.arms["B"]
        assert (a.user_count, a.reco_count, a.item_count, a.click_count) == (1, 2, 6, 1)
        assert (b.user_count, b.reco_count, b.item_count, b.click_count) == (2, 2, 6, 0)
        assert r.best_ctr_arm == "A" and r.fastest_arm == "A"
        assert r.relative_ctr_increase is None
        assert r.relative_runtime_decrease == pytest.approx((21 - 9) / 21)
        assert a.strategy == "CBF" and b.strategy == "LAST"

    def test_empty_arm(self):
        with pytest.raises(EmptyArm):
            report(cfg(), [rec("A")])

    def test_degenerate_table_gives_no_p(self):
        r = report(cfg(), [rec("A", latency=1), rec("A", latency=2),
                           rec("B", latency=3), rec("B", latency=5)])
        assert r.chi2_p_value is None and r.ctr_mark == ""
        assert r.ttest_p_value is not None

    def test_outputs(self):
        r = report(cfg(), [rec("A", 10, 2, latency=5), rec("A", 10, 1, latency=6),
                           rec("B", 10, 1, latency=9), rec("B", 10, 0, latency=12)])
        assert json.loads(r.to_json())["arms"]["A"]["click_count"] == 3
        text = r.to_text()
        assert "CBF" in text and "LAST" in text
        assert r.daily_csv().splitlines() == ["day,arm,strategy,ctr",
                                              "2023-11-15,A,CBF,0.150000",
                                              "2023-11-15,B,LAST,0.050000"]

    @given(st.lists(st.tuples(st.sampled_from("AB"), st.integers(1, 25), st.integers(0, 25),
                              st.floats(0.1, 200)), min_size=2, max_size=40))
    def test_report_invariants(self, rows):
        records = [rec(arm, n, min(c, n), latency=lat) for arm, n, c, lat in rows]
        if {r.arm for r in records} != {"A", "B"}:
            with pytest.raises(EmptyArm):
                report(cfg(), records)
            return
        r = report(cfg(), records)
        assert r.arms[r.best_ctr_arm].ctr >= max(s.ctr for s in r.arms.values())
        assert r.arms[r.fastest_arm].mean_runtime_ms <= min(
            s.mean_runtime_ms for s in r.arms.values())
        for p in (r.chi2_p_value, r.ttest_p_value):
            assert p is None or 0 <= p <= 1
        assert sum(s.reco_count for s in r.arms.values()) == len(records)


class TestOutcomeLog:
    def test_clicks_and_snapshot_isolation(self):
        log = OutcomeLog()
        log.append(OutcomeRecord("e", "A", "u", ["a", "b"], T, 1.0, [], "s1"))
        snap = log.snapshot()
        log.add_clicks("s1", ["b", "b"])
        assert snap[0].clicked_items == []
        assert log.get("s1").clicked_items == ["b"]
        with pytest.raises(KeyError):
            log.add_clicks("nope", [])
        with pytest.raises(InvalidParams):
            log.add_clicks("s1", ["zz"])

    def test_jsonl_roundtrip(self, tmp_path):
        log = OutcomeLog()
        log.append(OutcomeRecord("e", "B", "u", ["a"], T, 2.5, ["a"], "s9"))
        path = tmp_path / "o.jsonl"
        log.dump_jsonl(path)
        again = OutcomeLog()
        assert again.load_jsonl(path) == (1, [])
        assert again.snapshot() == log.snapshot()

    def test_bad_line(self, tmp_path):
        path = tmp_path / "o.jsonl"
        path.write_text('{"experiment_id": "e", "arm": "C", "user_id": "u", "items": [],'
                        ' "served_at": 1, "latency_ms": 1}\n')
        with pytest.raises(RecordError) as info:
            OutcomeLog().load_jsonl(path)
        assert info.value.line == 1
