#!/usr/bin/env python3
"""
多证券扩展
每个主体一只证券 X_i 且 Σ X_i = 0；可交易性、多证券公共知识交易、集合层面的阈值可验证性、
从单一证券拆分出证券组，以及对应的等价命题检验

此处 e_i 表示主体的期望利润（而非对 X 的期望），因此不要求各 X_i 单射。
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from epistemic_core import (
    Model, PartitionFrame, Security, ModelInputError, PreconditionError,
    reach, values_on, build_model, format_rational,
)
from verifiability import (
    Verdict, VerifiabilityWitness, KIND_CONSTANT, separated_pair,
)
from agreement import (
    CKTradeReport, FeasibleSet, SynthesizedPriors,
    constant_expectations, feasible_set, select_targets, priors_for_targets,
)

logger = logging.getLogger(__name__)

STATUS_PASS = "pass"
STATUS_VIOLATION = "violation"
STATUS_NOT_APPLICABLE = "not-applicable"


# ============================================================
# 数据模型
# ============================================================

@dataclass
class SecurityBundle:
    """证券组：主体 -> 该主体持有的证券"""
    securities: Dict[str, Security]

    @property
    def agents(self) -> List[str]:
        return list(self.securities)

    def check_agents(self, frame: PartitionFrame) -> None:
        if set(self.securities) != set(frame.agents):
            raise ModelInputError(
                f"证券组的主体 {sorted(self.securities)} 与模型主体 {list(frame.agents)} 不一致")
        for security in self.securities.values():
            security.validate(frame.states)

    def total(self, state: str) -> Fraction:
        return sum((x(state) for x in self.securities.values()), Fraction(0))

    def to_record(self) -> Dict:
        return {
            agent: {s: format_rational(v) for s, v in x.payoff.items()}
            for agent, x in self.securities.items()
        }


@dataclass
class TradabilityResult:
    """可交易性判定及第一个违反之处"""
    holds: bool
    violating_state: Optional[str] = None
    failing_agent: Optional[str] = None
    failing_cell: List[str] = field(default_factory=list)
    reason: str = ""

    def to_record(self) -> Dict:
        record = {"holds": self.holds}
        if not self.holds:
            record.update({"reason": self.reason})
            if self.violating_state is not None:
                record["violating_state"] = self.violating_state
            if self.failing_agent is not None:
                record["agent"] = self.failing_agent
                record["cell"] = list(self.failing_cell)
        return record


@dataclass
class PropositionVerdict:
    """集合阈值可验证 XOR 存在使所有期望利润为正常数的先验"""
    state: str
    status: str
    threshold: Verdict
    tradable: TradabilityResult
    sets: Dict[str, FeasibleSet]
    trade_possible: bool
    synthesized: Optional[SynthesizedPriors] = None
    confirmed: Optional[bool] = None

    @property
    def holds(self) -> bool:
        return self.status == STATUS_PASS

    def to_record(self) -> Dict:
        record = {
            "state": self.state,
            "status": self.status,
            "threshold_verifiable": self.threshold.to_record(),
            "tradable": self.tradable.to_record(),
            "feasible_profits": {a: s.describe() for a, s in self.sets.items()},
            "trade_possible": self.trade_possible,
        }
        if self.synthesized is not None:
            record["synthesized"] = self.synthesized.to_record()
            record["confirmed"] = self.confirmed
        return record


# ============================================================
# 判定
# ============================================================

def check_zero_sum(bundle: SecurityBundle, frame: PartitionFrame) -> Optional[str]:
    """返回第一个 Σ X_i ≠ 0 的状态，全部为零时返回 None"""
    for state in frame.states:
        if bundle.total(state) != 0:
            return state
    return None


def is_tradable(bundle: SecurityBundle, frame: PartitionFrame) -> TradabilityResult:
    """Σ X_i = 0，且每个主体在自己每个信息块上 X_i 的最大值严格为正"""
    bundle.check_agents(frame)
    violating = check_zero_sum(bundle, frame)
    if violating is not None:
        return TradabilityResult(
            False, violating_state=violating,
            reason=f"在 {violating} 处 Σ X_i = {format_rational(bundle.total(violating))} ≠ 0")
    for agent in frame.agents:
        security = bundle.securities[agent]
        for block in frame.cells_within(agent, frame.omega):
            _, _, high = values_on(security, block)
            if high <= 0:
                return TradabilityResult(
                    False, failing_agent=agent, failing_cell=frame.ordered(block),
                    reason=f"主体 {agent} 的信息块上 X_i 最大值为 {format_rational(high)}，不是严格正的")
    return TradabilityResult(True)


def constant_positive_profits(model: Model, bundle: SecurityBundle,
                              state: str) -> Optional[Dict[str, Fraction]]:
    """期望利润在 C(ω) 上对每个主体都为常数且严格为正时返回这些利润"""
    profits = constant_expectations(model, bundle.securities, state)
    if profits is None or any(e <= 0 for e in profits.values()):
        return None
    return profits


def detect_ck_trade_multi(model: Model, bundle: SecurityBundle, state: str) -> Optional[CKTradeReport]:
    """多证券公共知识交易：各主体对 X_i 的期望在 C(ω) 上为常数且严格为正"""
    tradable = is_tradable(bundle, model)
    if not tradable.holds:
        raise PreconditionError(f"证券组不可交易: {tradable.reason}")
    profits = constant_positive_profits(model, bundle, state)
    if profits is None:
        return None
    return CKTradeReport(state, profits)


def split_security(security: Security, expectations: Dict[str, Fraction]) -> Tuple[SecurityBundle, Fraction]:
    """
    把单一证券拆分为证券组

    期望降序排列后，前一半主体持有 X − p，后一半持有 −X + p，p 取分界处两个期望的中点。
    """
    n = len(expectations)
    if n == 0 or n % 2:
        raise ModelInputError(f"拆分需要偶数个主体，得到 {n} 个")
    ranked = sorted(expectations, key=lambda a: expectations[a], reverse=True)
    half = n // 2
    upper, lower = expectations[ranked[half - 1]], expectations[ranked[half]]
    if upper == lower:
        raise ModelInputError(f"分界处期望相同（{format_rational(upper)}），无法定价")
    price = (upper + lower) / 2
    top = set(ranked[:half])
    securities = {}
    for agent in expectations:
        if agent in top:
            securities[agent] = security.shifted(-price, name=f"{security.name}_{agent}")
        else:
            securities[agent] = (-security).shifted(price, name=f"{security.name}_{agent}")
    return SecurityBundle(securities), price


def bundle_from_trade(security: Security, report: CKTradeReport) -> Tuple[SecurityBundle, Fraction]:
    """按检测到的单证券交易期望拆分证券"""
    return split_security(security, report.expectations)


def is_threshold_verifiable_multi(frame: PartitionFrame, bundle: SecurityBundle, state: str) -> Verdict:
    """
    证券组的阈值可验证

    所有 X_i 在 C(ω) 上都为常数时成立；否则要求某个主体在自己的 X_i 上有两个严格分离的块。
    """
    bundle.check_agents(frame)
    component = reach(frame, state)
    if all(len(values_on(x, component)[0]) == 1 for x in bundle.securities.values()):
        return Verdict(True, [VerifiabilityWitness(KIND_CONSTANT, states=[frame.ordered(component)[0]])])
    for agent in frame.agents:
        witness = separated_pair(frame, bundle.securities[agent], agent, component)
        if witness is not None:
            return Verdict(True, [witness])
    return Verdict(False, failing_states=[state])


# ============================================================
# 可行利润与合成
# ============================================================

def feasible_profits(frame: PartitionFrame, bundle: SecurityBundle, state: str) -> Dict[str, FeasibleSet]:
    """每个主体 X_i 的可行常数期望与 (0, ∞) 的交"""
    bundle.check_agents(frame)
    component = reach(frame, state)
    return {
        agent: feasible_set(frame, bundle.securities[agent], agent, component).positive_part()
        for agent in frame.agents
    }


def synthesize_profit_priors(frame: PartitionFrame, bundle: SecurityBundle, state: str) -> SynthesizedPriors:
    """合成使每个主体期望利润在 C(ω) 上为正常数的先验"""
    sets = feasible_profits(frame, bundle, state)
    empty = [a for a, s in sets.items() if s.empty]
    if empty:
        raise PreconditionError(f"主体 {', '.join(empty)} 没有可行的正利润")
    targets = select_targets(frame.agents, sets, require_distinct=False)
    return priors_for_targets(frame, bundle.securities, state, targets)


def verify_proposition_on(frame: PartitionFrame, bundle: SecurityBundle, state: str) -> PropositionVerdict:
    """
    检验：证券组阈值可验证当且仅当任何先验下都没有多证券公共知识交易

    要求 Σ X_i = 0。证券组不可交易且等价性不成立时报告 not-applicable（命题只针对可交易证券组）。
    """
    bundle.check_agents(frame)
    violating = check_zero_sum(bundle, frame)
    if violating is not None:
        raise PreconditionError(f"证券组在 {violating} 处之和不为零")
    tradable = is_tradable(bundle, frame)
    threshold = is_threshold_verifiable_multi(frame, bundle, state)
    sets = feasible_profits(frame, bundle, state)
    possible = all(not s.empty for s in sets.values())
    verdict = PropositionVerdict(state, STATUS_PASS, threshold, tradable, sets, possible)
    holds = threshold.holds != possible
    if possible:
        synthesized = synthesize_profit_priors(frame, bundle, state)
        model = build_model(frame, synthesized.priors)
        profits = constant_positive_profits(model, bundle, state)
        verdict.synthesized = synthesized
        verdict.confirmed = profits is not None and profits == synthesized.targets
        holds = holds and verdict.confirmed
    if not holds:
        verdict.status = STATUS_VIOLATION if tradable.holds else STATUS_NOT_APPLICABLE
        if tradable.holds:
            logger.warning(f"状态 {state}: 多证券等价性不成立（阈值={threshold.holds}, 可交易={possible}）")
    return verdict
