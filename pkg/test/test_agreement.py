#!/usr/bin/env python3
"""
公共知识交易检测与先验合成测试脚本
"""

import os
import sys
from fractions import Fraction

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pytest
from hypothesis import given, settings, strategies as st

from epistemic_core import (
    PreconditionError, Partition, PartitionFrame, Security, build_model, conditional_expectation, Prior,
)
from agreement import (
    FeasibleSet, SynthesisFailure, detect_ck_trade, feasible_expectations, ck_trade_possible,
    select_targets, mixture_posterior, synthesize_disagreement_priors, perturb_targets,
    search_ck_trade, verify_theorem_on,
)
from verifiability import is_threshold_verifiable
from model_io import load_fixture
from model_strategies import frames, securities

E1 = load_fixture("e1")
E2 = load_fixture("e2")
THIRD = Fraction(1, 3)


def test_detect_ck_trade():
    """测试公共知识交易检测"""
    print("=== 测试交易检测 ===")
    m1, x1 = E1.model(), E1.security("X")
    for s in m1.states:
        report = detect_ck_trade(m1, x1, s)
        assert report is not None
        assert report.expectations == {"1": -THIRD, "2": THIRD}
        assert report.pair == ("1", "2")
        assert report.to_record()["pair"] == ["1", "2"]
    print("1. ✓ E1 每个状态都有交易，期望 -1/3 与 1/3")

    assert detect_ck_trade(E2.model(), E2.security("X"), "w1") is None
    print("2. ✓ E2 在 w1 处没有交易")


def test_feasible_sets():
    """测试可行集与交易可能性"""
    print("=== 测试可行集 ===")
    sets = feasible_expectations(E1.frame(), E1.security("X"), "w1")
    for agent in ("1", "2"):
        s = sets[agent]
        assert (s.lower, s.upper, s.lower_open, s.upper_open, s.empty) == (-1, 1, True, True, False)
    assert ck_trade_possible(E1.frame(), E1.security("X"), "w1").possible
    print("1. ✓ E1 两个主体的可行集都是 (-1, 1)")

    sets = feasible_expectations(E2.frame(), E2.security("X"), "w1")
    assert sets["1"].empty
    assert not ck_trade_possible(E2.frame(), E2.security("X"), "w1").possible
    print("2. ✓ E2 主体 1 的可行集为空")

    alone = PartitionFrame(("a", "b"), ("1",), {"1": Partition.from_lists([["a", "b"]])})
    assert not ck_trade_possible(alone, Security.from_values(("a", "b"), [0, 1]), "a").possible
    print("3. ✓ 单个主体不可能交易")

    closed = FeasibleSet("1", Fraction(0), Fraction(2))
    opened = FeasibleSet.for_cell("1", Fraction(2), Fraction(3))
    assert closed.intersect(opened).empty
    assert FeasibleSet.for_cell("1", Fraction(2), Fraction(2)).intersect(closed).is_point
    assert opened.positive_part().describe() == "(2, 3)"
    assert FeasibleSet.for_cell("1", Fraction(-1), Fraction(1)).positive_part().describe() == "(0, 1)"
    print("4. ✓ 开闭端点的交")


def test_synthesis_regression():
    """E1 的规范 k 选取恰好给出示例中的先验"""
    print("=== 测试先验合成 ===")
    for s in E1.frame().states:
        synthesized = synthesize_disagreement_priors(E1.frame(), E1.security("X"), s)
        assert synthesized.targets == {"1": -THIRD, "2": THIRD}
        for agent in ("1", "2"):
            assert synthesized.priors[agent].mass == E1.priors[agent]
    print("1. ✓ p1 = (1/6, 1/3, 1/3, 1/6), p2 = (1/3, 1/6, 1/6, 1/3)")

    with pytest.raises(SynthesisFailure) as info:
        synthesize_disagreement_priors(E2.frame(), E2.security("X"), "w1")
    assert info.value.feasibility.sets["1"].empty
    print("2. ✓ E2 合成失败并报告主体 1 的空可行集")


def test_mixture_posterior():
    """测试块上的混合后验"""
    print("=== 测试混合后验 ===")
    frame, security = E1.frame(), E1.security("X")
    posterior, gamma = mixture_posterior(frame, security, frozenset({"w1", "w2"}), -THIRD)
    assert posterior == {"w1": THIRD, "w2": 2 * THIRD}
    assert gamma == Fraction(1, 2)

    three = Security.from_values(("a", "b", "c"), [0, 1, 10])
    frame3 = PartitionFrame(("a", "b", "c"), ("1",), {"1": Partition.from_lists([["a", "b", "c"]])})
    for target in (Fraction(1, 100), Fraction(1), Fraction(9)):
        posterior, gamma = mixture_posterior(frame3, three, frame3.omega, target)
        assert all(p > 0 for p in posterior.values())
        assert sum(posterior.values()) == 1
        assert conditional_expectation(Prior(posterior), three, frame3.states) == target
    with pytest.raises(PreconditionError):
        mixture_posterior(frame3, three, frame3.omega, Fraction(10))
    print("   ✓ 后验全支撑、归一且期望等于目标")


def test_select_targets():
    """测试规范 k 选取及全部相等时的调整"""
    print("=== 测试 k 选取 ===")
    sets = {"1": FeasibleSet.for_cell("1", Fraction(-1), Fraction(2)),
            "2": FeasibleSet.for_cell("2", Fraction(0), Fraction(0))}
    assert select_targets(("1", "2"), sets) == {"1": Fraction(1), "2": Fraction(0)}
    assert select_targets(("1", "2"), sets, require_distinct=False) == {"1": Fraction(0), "2": Fraction(0)}
    print("   ✓ 全部相等时把最后一个区间型主体的 k 移向上端点")


def test_perturb_targets():
    """测试扰动目标后重新合成"""
    print("=== 测试扰动 ===")
    frame, security = E1.frame(), E1.security("X")
    base = synthesize_disagreement_priors(frame, security, "w1")
    moved = perturb_targets(frame, security, "w1", base)
    delta = Fraction(1, 1000)
    assert moved.targets == {"1": -THIRD + delta, "2": THIRD + delta}
    report = detect_ck_trade(build_model(frame, moved.priors), security, "w1")
    assert report.expectations == moved.targets
    print("   ✓ 扰动后的先验仍产生公共知识交易")


def test_theorem_on_fixtures():
    """测试等价定理的单点检验"""
    print("=== 测试定理检验 ===")
    frame, injective = E2.frame(), E2.security("X_inj")
    for s in frame.states:
        verdict = verify_theorem_on(frame, injective, s)
        assert verdict.holds
        assert verdict.threshold.holds and not verdict.trade.possible
    print("1. ✓ E2 单射扰动：阈值可验证且不可能交易")

    with pytest.raises(PreconditionError):
        verify_theorem_on(E1.frame(), E1.security("X"), "w1")
    alone = PartitionFrame(("a", "b"), ("1",), {"1": Partition.from_lists([["a"], ["b"]])})
    with pytest.raises(PreconditionError):
        verify_theorem_on(alone, Security.from_values(("a", "b"), [1, 2]), "a")
    print("2. ✓ 非单射证券与单个主体都被拒绝")


def test_search_oracle():
    """随机搜索在不可能交易时不会命中"""
    print("=== 测试随机搜索 ===")
    result = search_ck_trade(E2.frame(), E2.security("X"), "w1", samples=200, seed=3)
    assert result.hits == 0 and result.samples == 200
    print("   ✓ E2 上 200 组随机先验都没有交易")


@settings(max_examples=120, deadline=None)
@given(data=st.data())
def test_theorem_equivalence(data):
    """随机分区、单射证券：阈值可验证 XOR 可能交易，合成先验被检测确认"""
    frame = data.draw(frames(min_states=2, max_states=5, min_agents=2, max_agents=3))
    security = data.draw(securities(frame.states, injective=True))
    for s in frame.states:
        verdict = verify_theorem_on(frame, security, s)
        assert verdict.holds, verdict.note
        assert verdict.threshold.holds == is_threshold_verifiable(frame, security, s).holds


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_search_is_one_sided(data):
    """随机搜索命中时精确判定必为真"""
    frame = data.draw(frames(min_states=2, max_states=4, min_agents=2, max_agents=2))
    security = data.draw(securities(frame.states))
    state = data.draw(st.sampled_from(frame.states))
    result = search_ck_trade(frame, security, state, samples=30, seed=data.draw(st.integers(0, 99)))
    if result.hits:
        assert ck_trade_possible(frame, security, state).possible


def main():
    """主测试函数"""
    print("=" * 60)
    print("公共知识交易 - 测试套件")
    print("=" * 60)
    test_detect_ck_trade()
    test_feasible_sets()
    test_synthesis_regression()
    test_mixture_posterior()
    test_select_targets()
    test_perturb_targets()
    test_theorem_on_fixtures()
    test_search_oracle()
    test_theorem_equivalence()
    test_search_is_one_sided()
    print("=" * 60)
    print("所有测试完成！")


if __name__ == "__main__":
    main()
