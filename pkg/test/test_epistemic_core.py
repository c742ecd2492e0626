#!/usr/bin/env python3
"""
分区模型与知识算子测试脚本
"""

import os
import sys
from fractions import Fraction

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import pytest
from hypothesis import given, settings, strategies as st

from epistemic_core import (
    ModelInputError, PreconditionError, Model, Partition, PartitionFrame, Prior, Security, UnionFind,
    to_rational, format_rational, cell, knows, reach, is_common_knowledge, everyone_knows,
    common_knowledge_fixed_point, is_self_evident, components, common_refinement,
    conditional_expectation, expectation, values_on, uniform_prior,
)
from model_io import load_fixture
from model_strategies import frames, events, models, securities

E1 = load_fixture("e1")
E2 = load_fixture("e2")


def test_rationals():
    """测试有理数转换"""
    print("=== 测试有理数转换 ===")
    assert to_rational("1/3") == Fraction(1, 3)
    assert to_rational(" -2 ") == Fraction(-2)
    assert to_rational(7) == Fraction(7)
    assert format_rational(Fraction(-1, 3)) == "-1/3"
    assert format_rational(Fraction(4, 2)) == "2"
    for bad in (0.5, True, "x/2", "1/0", None):
        with pytest.raises(ModelInputError):
            to_rational(bad)
    print("   ✓ 有理数转换与格式化")


def test_cells_and_knowledge():
    """测试信息块与知识算子"""
    print("=== 测试信息块与知识 ===")
    m1, m2 = E1.model(), E2.model()
    assert cell(m1, "1", "w1") == {"w1", "w2"}
    assert cell(m2, "2", "w5") == {"w2", "w4", "w5"}
    single = PartitionFrame(("w",), ("a",), {"a": Partition.from_lists([["w"]])})
    assert cell(single, "a", "w") == {"w"}
    print("1. ✓ 信息块")

    assert knows(m1, "1", {"w1", "w2", "w3"}, "w1")
    assert not knows(m1, "1", {"w1"}, "w1")
    assert knows(m2, "1", {"w5"}, "w5")
    print("2. ✓ 知道事件")

    with pytest.raises(ModelInputError):
        cell(m1, "3", "w1")
    with pytest.raises(ModelInputError):
        cell(m1, "1", "w9")
    print("3. ✓ 未知标识报错")


def test_reach_and_common_knowledge():
    """测试可达集与公共知识"""
    print("=== 测试可达集 ===")
    m1, m2 = E1.model(), E2.model()
    for s in m1.states:
        assert reach(m1, s) == m1.omega
    assert reach(m2, "w1") == m2.omega
    assert is_common_knowledge(m1, m1.omega, "w1")
    assert not is_common_knowledge(m1, {"w1", "w2", "w3"}, "w1")

    split = PartitionFrame(
        ("a", "b", "c"), ("1", "2"),
        {"1": Partition.from_lists([["a"], ["b", "c"]]), "2": Partition.from_lists([["a"], ["b"], ["c"]])},
    )
    assert components(split) == [frozenset({"a"}), frozenset({"b", "c"})]
    assert is_common_knowledge(split, {"a"}, "a")
    assert is_self_evident(split, {"b", "c"})
    assert not is_self_evident(split, {"b"})
    assert common_refinement(m1, "w1") == {"w1"}
    print("   ✓ 可达集、自明事件与公共知识")


def test_everyone_knows_fixed_point():
    """测试“所有人都知道”算子的不动点"""
    print("=== 测试不动点 ===")
    m2 = E2.model()
    assert everyone_knows(m2, {"w5"}) == frozenset()
    assert everyone_knows(m2, m2.omega) == m2.omega
    assert common_knowledge_fixed_point(m2, {"w1", "w2", "w3", "w4"}) == frozenset()
    print("   ✓ E2 上只有 Ω 是公共知识")


@settings(max_examples=150, deadline=None)
@given(data=st.data())
def test_common_knowledge_matches_fixed_point(data):
    """可达集判定与迭代不动点一致，且可达集是包含 ω 的最小自明事件"""
    frame = data.draw(frames())
    event = data.draw(events(frame.states))
    fixed = common_knowledge_fixed_point(frame, event)
    for s in frame.states:
        assert is_common_knowledge(frame, event, s) == (s in fixed)
        assert is_self_evident(frame, reach(frame, s))
        if is_self_evident(frame, event) and s in event:
            assert reach(frame, s) <= event


def test_expectations():
    """测试条件期望"""
    print("=== 测试条件期望 ===")
    m1, m2 = E1.model(), E2.model()
    x1, x2 = E1.security("X"), E2.security("X")
    assert expectation(m1, x1, "1", "w1") == Fraction(-1, 3)
    assert expectation(m1, x1, "2", "w1") == Fraction(1, 3)
    assert expectation(m2, x2, "1", "w5") == 5
    assert expectation(m2, x2, "2", "w2", within={"w1", "w2", "w3", "w4"}) == Fraction(1, 3)
    with pytest.raises(PreconditionError):
        conditional_expectation(m1.priors["1"], x1, [])
    print("   ✓ E1 期望 -1/3 与 1/3，E2 单点块期望 5")

    values, low, high = values_on(x2, m2.omega)
    assert values == {-1, 1, 5} and low == -1 and high == 5
    assert values_on(x1, {"w1", "w2"})[0] == {-1, 1}
    print("   ✓ 值域")


def test_validation():
    """测试模型校验"""
    print("=== 测试模型校验 ===")
    states = ("a", "b")
    good = Partition.from_lists([["a"], ["b"]])
    with pytest.raises(ModelInputError):
        PartitionFrame(states, ("1",), {"1": Partition.from_lists([["a", "b"], ["b"]])})
    with pytest.raises(ModelInputError):
        PartitionFrame(states, ("1",), {"1": Partition.from_lists([["a"]])})
    with pytest.raises(ModelInputError):
        PartitionFrame(states, ("1",), {"1": Partition.from_lists([["a"], ["b"], []])})
    with pytest.raises(ModelInputError):
        Model(states, ("1",), {"1": good}, {"1": Prior({"a": Fraction(1, 2), "b": Fraction(1, 3)})})
    with pytest.raises(ModelInputError):
        Model(states, ("1",), {"1": good}, {"1": Prior({"a": Fraction(1), "b": Fraction(0)})})
    with pytest.raises(ModelInputError):
        Security.from_values(states, [1])
    print("   ✓ 重叠、未覆盖、空块、未归一、零质量、收益个数不符都会报错")


def test_restrict():
    """E2 限制到前四个状态后与 E1 相同"""
    print("=== 测试限制 ===")
    restricted = E2.model().restrict({"w1", "w2", "w3", "w4"})
    e1 = E1.model()
    assert restricted.states == e1.states
    for agent in e1.agents:
        assert restricted.priors[agent].mass == e1.priors[agent].mass
        for s in e1.states:
            assert restricted.cell_of(agent, s) == e1.cell_of(agent, s)
    with pytest.raises(ModelInputError):
        e1.restrict(set())
    print("   ✓ 分区与条件化后的先验都与 E1 一致")


@settings(max_examples=80, deadline=None)
@given(data=st.data())
def test_expectation_is_within_cell_range(data):
    """条件期望落在信息块的收益区间内"""
    model = data.draw(models())
    security = data.draw(securities(model.states))
    for agent in model.agents:
        for s in model.states:
            _, low, high = values_on(security, model.cell_of(agent, s))
            assert low <= expectation(model, security, agent, s) <= high


def test_union_find():
    """测试并查集"""
    print("=== 测试并查集 ===")
    uf = UnionFind("abcde")
    uf.union("a", "b")
    uf.union("d", "e")
    uf.union("b", "a")
    groups = sorted(sorted(g) for g in uf.groups().values())
    assert groups == [["a", "b"], ["c"], ["d", "e"]]
    assert uniform_prior("ab").mass == {"a": Fraction(1, 2), "b": Fraction(1, 2)}
    print("   ✓ 合并与分组")


def main():
    """主测试函数"""
    print("=" * 60)
    print("分区模型 - 测试套件")
    print("=" * 60)
    test_rationals()
    test_cells_and_knowledge()
    test_reach_and_common_knowledge()
    test_everyone_knows_fixed_point()
    test_common_knowledge_matches_fixed_point()
    test_expectations()
    test_validation()
    test_restrict()
    test_expectation_is_within_cell_range()
    test_union_find()
    print("=" * 60)
    print("所有测试完成！")


if __name__ == "__main__":
    main()
