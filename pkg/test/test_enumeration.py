#!/usr/bin/env python3
"""
穷举与随机检验测试脚本
"""

import os
import sys

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from announcement_dynamics import STATUS_PASS, STATUS_VIOLATION
from enumeration import (
    HarnessSummary, state_names, set_partitions, enumerate_frames, injective_security,
    instance_rng, random_common_prior_model, proposition_bundle,
    check_theorem_enumeration, check_common_prior_agreement, check_corollaries, check_properness,
    check_proposition_enumeration, check_common_prior_multi, tradable_pair_security,
)
from multi_security import SecurityBundle, is_tradable
from model_io import load_fixture


def test_set_partitions():
    """分区个数为 Bell 数"""
    print("=== 测试分区生成 ===")
    counts = [len(list(set_partitions(state_names(n)))) for n in range(1, 5)]
    assert counts == [1, 2, 5, 15]
    assert len(list(enumerate_frames(3))) == 25
    for partition in set_partitions(state_names(4)):
        assert sorted(s for block in partition for s in block) == list(state_names(4))
    print(f"   ✓ Bell 数 {counts}")


def test_summary_record():
    """测试汇总计数与第一个反例"""
    summary = HarnessSummary("demo")
    summary.record(STATUS_PASS)
    summary.record(STATUS_VIOLATION, {"state": "w1"})
    summary.record(STATUS_VIOLATION, {"state": "w2"})
    assert summary.checks == 3 and summary.violations == 2 and not summary.holds
    assert summary.to_record()["first_counterexample"] == {"state": "w1"}


def test_instance_rng_is_reproducible():
    """同一种子与序号给出同一实例"""
    first = random_common_prior_model(instance_rng(7, 3))
    second = random_common_prior_model(instance_rng(7, 3))
    assert first.states == second.states
    assert first.priors == second.priors


def test_theorem_enumeration():
    """两主体、|Ω| ≤ 4 的全部分区组合上定理成立"""
    print("=== 测试定理穷举 ===")
    summary = check_theorem_enumeration((2, 3, 4))
    assert summary.checks == 4 * 2 + 25 * 3 + 225 * 4
    assert summary.violations == 0
    assert summary.first_counterexample is None
    print(f"   ✓ {summary.checks} 项检验，没有反例")


def test_common_prior_agreement():
    """共同先验下的宣布过程总是一致"""
    print("=== 测试共同先验一致性 ===")
    summary = check_common_prior_agreement(instances=500, seed=0)
    assert summary.holds and summary.checks >= 500 * 2
    print(f"   ✓ {summary.checks} 项检验")


def test_corollaries():
    """两个推论与收益伸缩恒等式"""
    print("=== 测试推论 ===")
    corollary1, corollary2, telescoping = check_corollaries((2, 3), instances=100, seed=1)
    for summary in (corollary1, corollary2, telescoping):
        assert summary.violations == 0, summary.to_record()
    assert corollary2.checks == 2 * corollary1.checks
    assert corollary1.statuses.get(STATUS_PASS, 0) > 0
    print(f"   ✓ 推论1 {corollary1.statuses}，推论2 {corollary2.statuses}")


def test_properness():
    """随机分布上的适当性探测"""
    print("=== 测试适当性探测 ===")
    summary = check_properness(count=100, seed=0)
    assert summary.checks == 200 and summary.holds
    print("   ✓ 二次与对数规则各 100 个分布")


def test_proposition_enumeration():
    """拆分证券组上的多证券命题，包含 E1 证券组"""
    print("=== 测试多证券命题穷举 ===")
    e1 = load_fixture("e1")
    summary = check_proposition_enumeration((2, 3), extra=[(e1.frame(), e1.bundle("split"))])
    assert summary.violations == 0, summary.first_counterexample
    assert summary.statuses.get(STATUS_PASS, 0) >= len(e1.states)

    states = state_names(3)
    frame = next(iter(enumerate_frames(3)))
    bundle = proposition_bundle(frame, injective_security(states), states[0])
    if bundle is not None:
        assert sum(bundle.securities[a](states[0]) for a in frame.agents) == 0
    print(f"   ✓ {summary.statuses}")


def test_tradable_pair_security():
    """按构造生成的 (X, -X) 证券组可交易"""
    print("=== 测试可交易证券组生成 ===")
    frame = load_fixture("e1").frame()
    for index in range(50):
        security = tradable_pair_security(frame, instance_rng(3, index))
        assert security is not None
        assert is_tradable(SecurityBundle({"1": security, "2": -security}), frame).holds
    print("1. ✓ E1 分区上每次都能生成")

    produced = 0
    for index in range(200):
        rng = instance_rng(5, index)
        model = random_common_prior_model(rng, max_agents=2)
        security = tradable_pair_security(model, rng)
        if security is None:
            continue
        produced += 1
        assert is_tradable(SecurityBundle({"1": security, "2": -security}), model).holds
    assert produced >= 100
    print(f"2. ✓ 随机分区上生成 {produced} 个，全部可交易")


def test_common_prior_multi():
    """共同先验下没有多证券公共知识交易，且绝大多数实例真正被检验"""
    print("=== 测试共同先验多证券 ===")
    summary = check_common_prior_multi(instances=200, seed=0)
    assert summary.violations == 0, summary.first_counterexample
    assert summary.statuses.get("not-tradable", 0) <= 10
    assert summary.checks >= 380
    print(f"   ✓ {summary.checks} 项检验")


def main():
    """主测试函数"""
    print("=" * 60)
    print("穷举与随机检验 - 测试套件")
    print("=" * 60)
    test_set_partitions()
    test_summary_record()
    test_instance_rng_is_reproducible()
    test_theorem_enumeration()
    test_common_prior_agreement()
    test_corollaries()
    test_properness()
    test_proposition_enumeration()
    test_tradable_pair_security()
    test_common_prior_multi()
    print("=" * 60)
    print("所有测试完成！")


if __name__ == "__main__":
    main()
