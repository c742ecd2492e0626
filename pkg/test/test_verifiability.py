#!/usr/bin/env python3
"""
可验证性判定测试脚本
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from hypothesis import given, settings, strategies as st

from epistemic_core import Partition, PartitionFrame, Security
from verifiability import (
    KIND_CONSTANT, KIND_MAXMIN, KIND_THRESHOLD, DIVERGENCE_NOTE,
    is_verifiable, is_maxmin_verifiable, is_threshold_verifiable, is_collectively_verifiable,
    threshold_by_pair_scan, classify, recheck_witness,
)
from model_io import load_fixture
from model_strategies import frames, securities

E1 = load_fixture("e1")
E2 = load_fixture("e2")


def test_fixture_verdicts():
    """测试两个示例上的四种判定"""
    print("=== 测试示例判定 ===")
    f1, x1 = E1.frame(), E1.security("X")
    f2, x2 = E2.frame(), E2.security("X")

    assert not is_verifiable(f1, x1).holds
    v2 = is_verifiable(f2, x2)
    assert not v2.holds and v2.failing_states == ["w1", "w2", "w3", "w4"]
    print("1. ✓ 两个示例都不可验证")

    for s in f1.states:
        assert not is_maxmin_verifiable(f1, x1, s).holds
        assert not is_threshold_verifiable(f1, x1, s).holds
    print("2. ✓ E1 既不是 maxmin 也不是阈值可验证")

    for s in f2.states:
        w = is_maxmin_verifiable(f2, x2, s).witness
        assert (w.kind, w.agent, w.states, w.extreme, w.value) == (KIND_MAXMIN, "1", ["w5"], "max", 5)
        t = is_threshold_verifiable(f2, x2, s).witness
        assert (t.kind, t.agent, t.states, t.threshold) == (KIND_THRESHOLD, "1", ["w1", "w5"], 3)
    print("3. ✓ E2 maxmin 见证 (1, w5, max, 5)，阈值见证 x = 3")

    assert is_collectively_verifiable(f1, x1).holds
    assert is_collectively_verifiable(f2, x2).holds
    trivial = PartitionFrame(("a", "b"), ("1", "2"),
                             {a: Partition.from_lists([["a", "b"]]) for a in ("1", "2")})
    assert not is_collectively_verifiable(trivial, Security.from_values(("a", "b"), [0, 1])).holds
    print("4. ✓ 集体可验证")


def test_trivial_cases():
    """测试常数证券与单点分区"""
    print("=== 测试平凡情形 ===")
    frame = E1.frame()
    constant = Security.from_values(frame.states, [2, 2, 2, 2])
    for s in frame.states:
        assert is_maxmin_verifiable(frame, constant, s).holds
        verdict = is_threshold_verifiable(frame, constant, s)
        assert verdict.holds and verdict.witness.kind == KIND_CONSTANT
    singletons = PartitionFrame(frame.states, ("1", "2"), {
        "1": Partition.from_lists([[s] for s in frame.states]),
        "2": frame.partitions["2"],
    })
    assert is_verifiable(singletons, E1.security("X")).holds
    print("   ✓ 常数证券处处阈值可验证，单点分区可验证")


def test_divergence_note():
    """非单射证券：maxmin 成立而阈值不成立时如实报告"""
    print("=== 测试非单射分歧 ===")
    frame = PartitionFrame(("a", "b", "c"), ("1", "2"), {
        "1": Partition.from_lists([["a"], ["b", "c"]]),
        "2": Partition.from_lists([["a", "b", "c"]]),
    })
    security = Security.from_values(frame.states, [5, 1, 5])
    profile = classify(frame, security)
    assert profile.maxmin["a"].holds
    assert not profile.threshold["a"].holds
    assert profile.threshold["a"].note == DIVERGENCE_NOTE
    assert not profile.injective and len(profile.notes) == 3
    print("   ✓ 分歧以附注形式报告")


def test_threshold_independent_of_priors():
    """阈值判定只依赖分区与证券"""
    print("=== 测试与先验无关 ===")
    m2 = E2.model()
    swapped = type(m2)(m2.states, m2.agents, m2.partitions, {"1": m2.priors["2"], "2": m2.priors["1"]})
    for s in m2.states:
        a = is_threshold_verifiable(m2, E2.security("X"), s)
        b = is_threshold_verifiable(swapped, E2.security("X"), s)
        assert a.to_record() == b.to_record()
    print("   ✓ 交换先验不改变判定")


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_witnesses_and_pair_scan(data):
    """见证按定义复核；区间交判定与逐对扫描一致"""
    frame = data.draw(frames(max_states=6))
    security = data.draw(securities(frame.states))
    for s in frame.states:
        fast = is_threshold_verifiable(frame, security, s)
        slow = threshold_by_pair_scan(frame, security, s)
        assert fast.holds == slow.holds
        for verdict in (fast, is_maxmin_verifiable(frame, security, s)):
            if verdict.holds:
                assert recheck_witness(frame, security, verdict.witness, s)
    for verdict in (is_verifiable(frame, security), is_collectively_verifiable(frame, security)):
        for w in verdict.witnesses:
            assert recheck_witness(frame, security, w)


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_implication_chain(data):
    """可验证 ⇒ maxmin ⇒（单射时）阈值可验证"""
    frame = data.draw(frames(max_states=6))
    injective = data.draw(st.booleans())
    security = data.draw(securities(frame.states, injective=injective))
    verifiable = is_verifiable(frame, security).holds
    for s in frame.states:
        maxmin = is_maxmin_verifiable(frame, security, s).holds
        if verifiable:
            assert maxmin
        if maxmin and security.is_injective():
            assert is_threshold_verifiable(frame, security, s).holds


def main():
    """主测试函数"""
    print("=" * 60)
    print("可验证性 - 测试套件")
    print("=" * 60)
    test_fixture_verdicts()
    test_trivial_cases()
    test_divergence_note()
    test_threshold_independent_of_priors()
    test_witnesses_and_pair_scan()
    test_implication_chain()
    print("=" * 60)
    print("所有测试完成！")


if __name__ == "__main__":
    main()
