#!/usr/bin/env python3
"""
静态无交易分析
检测某状态处的公共知识交易，精确判定是否存在某组先验使其发生，并按构造性证明合成这样的先验

可行集（FeasibleSet）：主体在 C(ω) 内所有信息块上能同时取到的常数条件期望值的集合。
每个块贡献一个约束：收益全为 v 的块贡献 {v}，否则贡献开区间 (m, M)；可行集是这些约束的交。
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Tuple

from epistemic_core import (
    Event, Model, PartitionFrame, Prior, Security, PreconditionError,
    reach, values_on, expectation, build_model, format_rational,
)
from verifiability import Verdict, is_threshold_verifiable

logger = logging.getLogger(__name__)


# ============================================================
# 数据模型
# ============================================================

@dataclass
class FeasibleSet:
    """主体可实现的常数期望集合：空集、单点或区间（端点带开闭标记）"""
    agent: str
    lower: Fraction = Fraction(0)
    upper: Fraction = Fraction(0)
    lower_open: bool = False
    upper_open: bool = False
    empty: bool = False

    @classmethod
    def for_cell(cls, agent: str, low: Fraction, high: Fraction) -> "FeasibleSet":
        if low == high:
            return cls(agent, low, high)
        return cls(agent, low, high, lower_open=True, upper_open=True)

    @classmethod
    def nothing(cls, agent: str) -> "FeasibleSet":
        return cls(agent, empty=True)

    @property
    def is_point(self) -> bool:
        return not self.empty and self.lower == self.upper

    @property
    def is_interval(self) -> bool:
        return not self.empty and self.lower < self.upper

    def contains(self, value: Fraction) -> bool:
        if self.empty:
            return False
        above = value > self.lower if self.lower_open else value >= self.lower
        below = value < self.upper if self.upper_open else value <= self.upper
        return above and below

    def intersect(self, other: "FeasibleSet") -> "FeasibleSet":
        if self.empty or other.empty:
            return FeasibleSet.nothing(self.agent)
        if self.lower != other.lower:
            lower, lower_open = max((self.lower, self.lower_open), (other.lower, other.lower_open),
                                    key=lambda t: t[0])
        else:
            lower, lower_open = self.lower, self.lower_open or other.lower_open
        if self.upper != other.upper:
            upper, upper_open = min((self.upper, self.upper_open), (other.upper, other.upper_open),
                                    key=lambda t: t[0])
        else:
            upper, upper_open = self.upper, self.upper_open or other.upper_open
        if lower > upper or (lower == upper and (lower_open or upper_open)):
            return FeasibleSet.nothing(self.agent)
        return FeasibleSet(self.agent, lower, upper, lower_open, upper_open)

    def positive_part(self) -> "FeasibleSet":
        """与 (0, ∞) 取交"""
        if self.empty or self.upper <= 0:
            return FeasibleSet.nothing(self.agent)
        if self.lower > 0:
            return FeasibleSet(self.agent, self.lower, self.upper, self.lower_open, self.upper_open)
        if self.lower == self.upper:
            return FeasibleSet.nothing(self.agent)
        return FeasibleSet(self.agent, Fraction(0), self.upper, True, self.upper_open)

    def describe(self) -> str:
        if self.empty:
            return "∅"
        if self.is_point:
            return "{" + format_rational(self.lower) + "}"
        left = "(" if self.lower_open else "["
        right = ")" if self.upper_open else "]"
        return f"{left}{format_rational(self.lower)}, {format_rational(self.upper)}{right}"

    def to_record(self) -> Dict:
        record = {"agent": self.agent, "empty": self.empty}
        if not self.empty:
            record.update({
                "lower": format_rational(self.lower),
                "upper": format_rational(self.upper),
                "lower_open": self.lower_open,
                "upper_open": self.upper_open,
            })
        return record


@dataclass
class CKTradeReport:
    """公共知识交易报告；多证券交易没有分歧主体对，pair 为 None"""
    state: str
    expectations: Dict[str, Fraction]
    pair: Optional[Tuple[str, str]] = None

    def to_record(self) -> Dict:
        record = {
            "state": self.state,
            "expectations": {a: format_rational(e) for a, e in self.expectations.items()},
        }
        if self.pair is not None:
            record["pair"] = list(self.pair)
        return record


@dataclass
class TradeFeasibility:
    """ck_trade_possible 的结果：判定、各主体可行集、说明"""
    possible: bool
    sets: Dict[str, FeasibleSet]
    explanation: str

    def to_record(self) -> Dict:
        return {
            "possible": self.possible,
            "feasible_sets": {a: s.describe() for a, s in self.sets.items()},
            "explanation": self.explanation,
        }


@dataclass
class SynthesizedPriors:
    """合成的先验、目标期望 k_i 及各块的权重分配"""
    priors: Dict[str, Prior]
    targets: Dict[str, Fraction]
    cell_weights: Dict[str, Fraction]
    mixtures: Dict[str, List[Tuple[List[str], Fraction]]] = field(default_factory=dict)

    def to_record(self) -> Dict:
        return {
            "targets": {a: format_rational(k) for a, k in self.targets.items()},
            "priors": {a: {s: format_rational(m) for s, m in p.mass.items()} for a, p in self.priors.items()},
            "cell_weights": {a: format_rational(w) for a, w in self.cell_weights.items()},
            "mixtures": {
                a: [{"cell": cells, "gamma": format_rational(g)} for cells, g in items]
                for a, items in self.mixtures.items()
            },
        }


class SynthesisFailure(PreconditionError):
    """前置条件不满足，无法合成分歧先验"""

    def __init__(self, message: str, feasibility: TradeFeasibility):
        super().__init__(message)
        self.feasibility = feasibility


@dataclass
class TheoremVerdict:
    """等价性检验：阈值可验证 XOR 可能存在公共知识交易"""
    state: str
    threshold: Verdict
    trade: TradeFeasibility
    holds: bool
    synthesized: Optional[SynthesizedPriors] = None
    confirmed: Optional[bool] = None
    note: str = ""

    def to_record(self) -> Dict:
        record = {
            "state": self.state,
            "threshold_verifiable": self.threshold.to_record(),
            "trade": self.trade.to_record(),
            "holds": self.holds,
        }
        if self.synthesized is not None:
            record["synthesized"] = self.synthesized.to_record()
            record["confirmed"] = self.confirmed
        if self.note:
            record["note"] = self.note
        return record


# ============================================================
# 检测
# ============================================================

def constant_expectations(model: Model, securities: Dict[str, Security],
                          state: str) -> Optional[Dict[str, Fraction]]:
    """
    各主体对各自证券的期望在 C(ω) 上是否为常数

    securities: 主体 -> 该主体评估的证券。常数时返回 主体 -> 期望，否则返回 None。
    """
    component = reach(model, state)
    result: Dict[str, Fraction] = {}
    for agent in model.agents:
        values = {
            expectation(model, securities[agent], agent, block_state)
            for block_state in (model.ordered(b)[0] for b in model.cells_within(agent, component))
        }
        if len(values) != 1:
            logger.debug(f"主体 {agent} 的期望在 C({state}) 上不是常数: {sorted(values)}")
            return None
        result[agent] = values.pop()
    return result


def detect_ck_trade(model: Model, security: Security, state: str) -> Optional[CKTradeReport]:
    """期望在 C(ω) 上对每个主体为常数，且至少两个主体的常数不同时返回报告"""
    security.validate(model.states)
    values = constant_expectations(model, {a: security for a in model.agents}, state)
    if values is None:
        return None
    for first, second in combinations(model.agents, 2):
        if values[first] != values[second]:
            return CKTradeReport(state, values, (first, second))
    return None


# ============================================================
# 精确判定（不读取先验）
# ============================================================

def feasible_set(frame: PartitionFrame, security: Security, agent: str, component: Event) -> FeasibleSet:
    result: Optional[FeasibleSet] = None
    for block in frame.cells_within(agent, component):
        _, low, high = values_on(security, block)
        constraint = FeasibleSet.for_cell(agent, low, high)
        result = constraint if result is None else result.intersect(constraint)
    return result


def feasible_expectations(frame: PartitionFrame, security: Security, state: str) -> Dict[str, FeasibleSet]:
    """每个主体在 C(ω) 内的可行常数期望集合"""
    security.validate(frame.states)
    component = reach(frame, state)
    return {agent: feasible_set(frame, security, agent, component) for agent in frame.agents}


def ck_trade_possible(frame: PartitionFrame, security: Security, state: str) -> TradeFeasibility:
    """是否存在某组全支撑先验使 ω 处出现公共知识交易"""
    sets = feasible_expectations(frame, security, state)
    if len(frame.agents) < 2:
        return TradeFeasibility(False, sets, "只有一个主体，不存在可以分歧的一对主体")
    empty = [a for a, s in sets.items() if s.empty]
    if empty:
        return TradeFeasibility(False, sets, f"主体 {', '.join(empty)} 的可行集为空")
    points = {s.lower for s in sets.values() if s.is_point}
    if all(s.is_point for s in sets.values()) and len(points) == 1:
        value = format_rational(points.pop())
        return TradeFeasibility(False, sets, f"所有主体的可行集都是同一个单点 {{{value}}}")
    return TradeFeasibility(True, sets, "每个主体的可行集非空，且可以选出不同的期望值")


# ============================================================
# 合成
# ============================================================

def select_targets(agents: Tuple[str, ...], sets: Dict[str, FeasibleSet],
                   require_distinct: bool = True) -> Dict[str, Fraction]:
    """
    规范的 k 选取规则

    第 i 个主体（从 1 开始，共 n 个）的可行集为非退化区间 (L, U) 时取 L + (U − L)·i/(n+1)，
    单点时取该点。若结果全部相等，则把最后一个区间型主体的 k 向上端点移动一半。
    """
    n = len(agents)
    targets: Dict[str, Fraction] = {}
    for index, agent in enumerate(agents, start=1):
        s = sets[agent]
        if s.empty:
            raise PreconditionError(f"主体 {agent} 的可行集为空")
        if s.is_interval:
            targets[agent] = s.lower + (s.upper - s.lower) * Fraction(index, n + 1)
        else:
            targets[agent] = s.lower
    if require_distinct and n > 1 and len(set(targets.values())) == 1:
        free = [a for a in agents if sets[a].is_interval]
        if free:
            last = free[-1]
            targets[last] = (targets[last] + sets[last].upper) / 2
    return targets


def mixture_posterior(frame: PartitionFrame, security: Security, block: Event,
                      target: Fraction) -> Tuple[Dict[str, Fraction], Fraction]:
    """
    在一个信息块上构造期望恰为 target 的全支撑后验

    后验 = α·(某个最小收益状态上的点质量) + β·(某个最大收益状态上的点质量) + γ·(块上的均匀分布)，
    γ 依次取 1/2, 1/4, 1/8, … 中第一个使 α, β ≥ 0 的值。返回 (后验, γ)。
    """
    ordered = frame.ordered(block)
    values, low, high = values_on(security, ordered)
    size = len(ordered)
    if len(values) == 1:
        if target != low:
            raise PreconditionError(f"块 {ordered} 上收益恒为 {format_rational(low)}，无法得到期望 {format_rational(target)}")
        return {s: Fraction(1, size) for s in ordered}, Fraction(1)
    if not low < target < high:
        raise PreconditionError(
            f"目标期望 {format_rational(target)} 不在块 {ordered} 的开区间 "
            f"({format_rational(low)}, {format_rational(high)}) 内")
    min_state = next(s for s in ordered if security(s) == low)
    max_state = next(s for s in ordered if security(s) == high)
    mean = sum((security(s) for s in ordered), Fraction(0)) / size
    gamma = Fraction(1, 2)
    while True:
        beta = (target - (1 - gamma) * low - gamma * mean) / (high - low)
        alpha = 1 - gamma - beta
        if alpha >= 0 and beta >= 0:
            break
        gamma /= 2
    posterior = {s: gamma / size for s in ordered}
    posterior[min_state] += alpha
    posterior[max_state] += beta
    return posterior, gamma


def priors_for_targets(frame: PartitionFrame, securities: Dict[str, Security], state: str,
                       targets: Dict[str, Fraction]) -> SynthesizedPriors:
    """
    按给定目标 k_i 为每个主体拼装先验

    C(ω) 内的块使用混合后验，C(ω) 外的块使用均匀后验；主体的所有块权重相等。
    """
    component = reach(frame, state)
    priors: Dict[str, Prior] = {}
    weights: Dict[str, Fraction] = {}
    mixtures: Dict[str, List[Tuple[List[str], Fraction]]] = {}
    for agent in frame.agents:
        blocks = frame.cells_within(agent, frame.omega)
        weight = Fraction(1, len(blocks))
        mass: Dict[str, Fraction] = {}
        mixtures[agent] = []
        for block in blocks:
            ordered = frame.ordered(block)
            if block <= component:
                posterior, gamma = mixture_posterior(frame, securities[agent], block, targets[agent])
                mixtures[agent].append((ordered, gamma))
            else:
                posterior = {s: Fraction(1, len(ordered)) for s in ordered}
            for s, p in posterior.items():
                mass[s] = weight * p
        priors[agent] = Prior({s: mass[s] for s in frame.states})
        weights[agent] = weight
    return SynthesizedPriors(priors, dict(targets), weights, mixtures)


def synthesize_disagreement_priors(frame: PartitionFrame, security: Security, state: str,
                                   targets: Optional[Dict[str, Fraction]] = None) -> SynthesizedPriors:
    """
    合成使 ω 处出现公共知识交易的先验

    不满足 ck_trade_possible 时抛出 SynthesisFailure（附带各主体的可行集）。
    """
    feasibility = ck_trade_possible(frame, security, state)
    if not feasibility.possible:
        raise SynthesisFailure(f"无法合成分歧先验: {feasibility.explanation}", feasibility)
    if targets is None:
        targets = select_targets(frame.agents, feasibility.sets)
    else:
        for agent, k in targets.items():
            if not feasibility.sets[agent].contains(k):
                raise PreconditionError(f"主体 {agent} 的目标 {format_rational(k)} 不在可行集 "
                                        f"{feasibility.sets[agent].describe()} 内")
        if len(set(targets.values())) < 2:
            raise PreconditionError("目标期望全部相等，不构成交易")
    synthesized = priors_for_targets(frame, {a: security for a in frame.agents}, state, targets)
    logger.debug(f"状态 {state} 合成目标: { {a: format_rational(k) for a, k in targets.items()} }")
    return synthesized


def perturb_targets(frame: PartitionFrame, security: Security, state: str,
                    synthesized: SynthesizedPriors, delta: Fraction = Fraction(1, 1000)) -> SynthesizedPriors:
    """把每个区间型主体的 k_i 在其开可行集内移动 delta 后重新合成"""
    sets = feasible_expectations(frame, security, state)
    moved = dict(synthesized.targets)
    for agent in frame.agents:
        if not sets[agent].is_interval:
            continue
        k = moved[agent]
        moved[agent] = k + delta if sets[agent].contains(k + delta) else k - delta
    if len(set(moved.values())) < 2:
        moved = dict(synthesized.targets)
    return synthesize_disagreement_priors(frame, security, state, moved)


# ============================================================
# 随机搜索（单侧对照）
# ============================================================

@dataclass
class SearchResult:
    """随机先验搜索的结果"""
    samples: int
    hits: int
    first_hit: Optional[Model] = None
    report: Optional[CKTradeReport] = None

    def to_record(self) -> Dict:
        record = {"samples": self.samples, "hits": self.hits}
        if self.report is not None:
            record["report"] = self.report.to_record()
        return record


def random_prior(states: Tuple[str, ...], rng: random.Random, max_weight: int = 12) -> Prior:
    weights = [rng.randint(1, max_weight) for _ in states]
    total = sum(weights)
    return Prior({s: Fraction(w, total) for s, w in zip(states, weights)})


def search_ck_trade(frame: PartitionFrame, security: Security, state: str,
                    samples: int = 1000, seed: int = 0) -> SearchResult:
    """随机抽取全支撑有理先验寻找公共知识交易；命中即说明精确判定应为真"""
    rng = random.Random(seed)
    hits = 0
    first_hit = None
    first_report = None
    for _ in range(samples):
        priors = {a: random_prior(frame.states, rng) for a in frame.agents}
        model = build_model(frame, priors)
        report = detect_ck_trade(model, security, state)
        if report is not None:
            hits += 1
            if first_hit is None:
                first_hit, first_report = model, report
    logger.info(f"随机搜索 {samples} 组先验，命中 {hits} 次")
    return SearchResult(samples, hits, first_hit, first_report)


# ============================================================
# 定理检验
# ============================================================

def verify_theorem_on(frame: PartitionFrame, security: Security, state: str) -> TheoremVerdict:
    """
    阈值可验证当且仅当任何先验下都没有公共知识交易

    前置条件：证券在 Ω 上单射，且至少两个主体。可能交易时再合成先验并用 detect_ck_trade 确认。
    """
    security.validate(frame.states)
    duplicate = security.duplicated_payoff()
    if duplicate is not None:
        value, states = duplicate
        raise PreconditionError(f"证券不是单射：收益 {format_rational(value)} 在状态 {states} 上重复")
    if len(frame.agents) < 2:
        raise PreconditionError("定理检验至少需要两个主体")

    threshold = is_threshold_verifiable(frame, security, state)
    trade = ck_trade_possible(frame, security, state)
    verdict = TheoremVerdict(state, threshold, trade, holds=threshold.holds != trade.possible)
    if trade.possible:
        synthesized = synthesize_disagreement_priors(frame, security, state)
        report = detect_ck_trade(build_model(frame, synthesized.priors), security, state)
        verdict.synthesized = synthesized
        verdict.confirmed = report is not None and report.expectations == synthesized.targets
        verdict.holds = verdict.holds and verdict.confirmed
    if not verdict.holds:
        verdict.note = f"等价性不成立: 阈值={threshold.holds}, 可交易={trade.possible}"
        logger.warning(f"状态 {state}: {verdict.note}")
    return verdict
