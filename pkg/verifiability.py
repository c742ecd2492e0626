#!/usr/bin/env python3
"""
证券的四种可验证性判定
可验证 / maxmin 可验证 / 阈值可验证 / 集体可验证，每个判定都返回可复核的见证

所有判定只依赖分区结构与证券，不读取先验。
见证的选取规则：主体按模型顺序、状态按规范顺序扫描，返回第一个满足条件的见证。
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from epistemic_core import (
    Event, PartitionFrame, Security, ModelInputError,
    reach, values_on, common_refinement, format_rational,
)

logger = logging.getLogger(__name__)

KIND_PER_STATE = "verifiable-per-state"
KIND_MAXMIN = "maxmin"
KIND_THRESHOLD = "threshold"
KIND_COLLECTIVE = "collective"
KIND_CONSTANT = "constant-on-component"

DIVERGENCE_NOTE = (
    "maxmin 可验证成立但阈值可验证不成立：证券非单射时两者并无强弱关系，按定义如实报告"
)


# ============================================================
# 数据模型
# ============================================================

@dataclass
class VerifiabilityWitness:
    """可验证性见证"""
    kind: str
    agent: Optional[str] = None
    states: List[str] = field(default_factory=list)
    threshold: Optional[Fraction] = None
    extreme: Optional[str] = None
    value: Optional[Fraction] = None

    def to_record(self) -> Dict:
        record = {"kind": self.kind}
        if self.agent is not None:
            record["agent"] = self.agent
        record["states"] = list(self.states)
        if self.threshold is not None:
            record["threshold"] = format_rational(self.threshold)
        if self.extreme is not None:
            record["extreme"] = self.extreme
        if self.value is not None:
            record["value"] = format_rational(self.value)
        return record


@dataclass
class Verdict:
    """判定结果：是否成立、见证列表、不成立的状态、附注"""
    holds: bool
    witnesses: List[VerifiabilityWitness] = field(default_factory=list)
    failing_states: List[str] = field(default_factory=list)
    note: Optional[str] = None

    @property
    def witness(self) -> Optional[VerifiabilityWitness]:
        return self.witnesses[0] if self.witnesses else None

    def to_record(self) -> Dict:
        record = {
            "holds": self.holds,
            "witnesses": [w.to_record() for w in self.witnesses],
        }
        if self.failing_states:
            record["failing_states"] = list(self.failing_states)
        if self.note:
            record["note"] = self.note
        return record


@dataclass
class VerifiabilityProfile:
    """一个模型上四种性质的完整报告"""
    verifiable: Verdict
    collective: Verdict
    maxmin: Dict[str, Verdict]
    threshold: Dict[str, Verdict]
    injective: bool
    notes: List[str] = field(default_factory=list)

    def to_record(self) -> Dict:
        return {
            "verifiable": self.verifiable.to_record(),
            "collectively_verifiable": self.collective.to_record(),
            "maxmin_verifiable": {s: v.to_record() for s, v in self.maxmin.items()},
            "threshold_verifiable": {s: v.to_record() for s, v in self.threshold.items()},
            "injective": self.injective,
            "notes": list(self.notes),
        }


# ============================================================
# 工具函数
# ============================================================

def level_value(security: Security, block: Event) -> Optional[Fraction]:
    """块落在某个水平集 X⁻¹(k) 内时返回 k，否则返回 None"""
    values = {security(s) for s in block}
    if len(values) == 1:
        return next(iter(values))
    return None


def cell_intervals(frame: PartitionFrame, security: Security, agent: str,
                   event: Event) -> List[Tuple[Event, Fraction, Fraction]]:
    """主体在事件内各分区块上的收益区间 [m, M]"""
    result = []
    for block in frame.cells_within(agent, event):
        _, low, high = values_on(security, block)
        result.append((block, low, high))
    return result


def separated_pair(frame: PartitionFrame, security: Security, agent: str,
                   event: Event) -> Optional[VerifiabilityWitness]:
    """
    区间交判定：主体在事件内各块的闭区间交为空时，找出一对严格分离的块

    一维区间族交为空当且仅当最小的右端点严格小于最大的左端点。
    """
    intervals = cell_intervals(frame, security, agent, event)
    low_block, _, lowest_max = min(intervals, key=lambda t: t[2])
    high_block, highest_min, _ = max(intervals, key=lambda t: t[1])
    if lowest_max < highest_min:
        return VerifiabilityWitness(
            kind=KIND_THRESHOLD,
            agent=agent,
            states=[frame.ordered(low_block)[0], frame.ordered(high_block)[0]],
            threshold=(lowest_max + highest_min) / 2,
        )
    return None


# ============================================================
# 判定
# ============================================================

def is_verifiable(model: PartitionFrame, security: Security) -> Verdict:
    """每个状态上都有某个主体的信息块落在一个水平集内"""
    security.validate(model.states)
    witnesses = []
    failing = []
    for state in model.states:
        found = None
        for agent in model.agents:
            k = level_value(security, model.cell_of(agent, state))
            if k is not None:
                found = VerifiabilityWitness(KIND_PER_STATE, agent=agent, states=[state], value=k)
                break
        if found is None:
            failing.append(state)
        else:
            witnesses.append(found)
    return Verdict(holds=not failing, witnesses=witnesses, failing_states=failing)


def is_maxmin_verifiable(model: PartitionFrame, security: Security, state: str) -> Verdict:
    """某主体在 C(ω) 内某处的信息块落在 max 或 min 的水平集内"""
    security.validate(model.states)
    component = reach(model, state)
    _, low, high = values_on(security, component)
    for agent in model.agents:
        for other in model.ordered(component):
            k = level_value(security, model.cell_of(agent, other))
            if k is None:
                continue
            for extreme, target in (("max", high), ("min", low)):
                if k == target:
                    return Verdict(True, [VerifiabilityWitness(
                        KIND_MAXMIN, agent=agent, states=[other], extreme=extreme, value=k)])
    return Verdict(False, failing_states=[state])


def is_threshold_verifiable(model: PartitionFrame, security: Security, state: str) -> Verdict:
    """
    阈值可验证

    X 在 C(ω) 上为常数时直接成立；否则要求某主体在 C(ω) 内有两个块，
    其收益区间严格分离。阈值 x 取间隙中点。
    """
    security.validate(model.states)
    component = reach(model, state)
    values, low, high = values_on(security, component)
    if len(values) == 1:
        first = model.ordered(component)[0]
        return Verdict(True, [VerifiabilityWitness(KIND_CONSTANT, states=[first], value=low)])
    for agent in model.agents:
        witness = separated_pair(model, security, agent, component)
        if witness is not None:
            return Verdict(True, [witness])
    return Verdict(False, failing_states=[state])


def threshold_by_pair_scan(model: PartitionFrame, security: Security, state: str) -> Verdict:
    """按定义直接扫描 (主体, ω′, ω″) 三元组；区间交判定的对照实现"""
    component = reach(model, state)
    values, low, _ = values_on(security, component)
    if len(values) == 1:
        return Verdict(True, [VerifiabilityWitness(KIND_CONSTANT, states=[model.ordered(component)[0]], value=low)])
    ordered = model.ordered(component)
    for agent in model.agents:
        for first in ordered:
            _, _, upper = values_on(security, model.cell_of(agent, first))
            for second in ordered:
                _, lower, _ = values_on(security, model.cell_of(agent, second))
                if upper < lower:
                    return Verdict(True, [VerifiabilityWitness(
                        KIND_THRESHOLD, agent=agent, states=[first, second],
                        threshold=(upper + lower) / 2)])
    return Verdict(False, failing_states=[state])


def is_collectively_verifiable(model: PartitionFrame, security: Security) -> Verdict:
    """每个状态上所有主体信息块的交都落在一个水平集内"""
    security.validate(model.states)
    witnesses = []
    failing = []
    for state in model.states:
        pooled = common_refinement(model, state)
        k = level_value(security, pooled)
        if k is None:
            failing.append(state)
        else:
            witnesses.append(VerifiabilityWitness(KIND_COLLECTIVE, states=model.ordered(pooled), value=k))
    return Verdict(holds=not failing, witnesses=witnesses, failing_states=failing)


def classify(model: PartitionFrame, security: Security) -> VerifiabilityProfile:
    """汇总四种性质在所有状态上的判定"""
    maxmin = {s: is_maxmin_verifiable(model, security, s) for s in model.states}
    threshold = {s: is_threshold_verifiable(model, security, s) for s in model.states}
    notes = []
    for s in model.states:
        if maxmin[s].holds and not threshold[s].holds:
            threshold[s].note = DIVERGENCE_NOTE
            notes.append(f"{s}: {DIVERGENCE_NOTE}")
            logger.warning(f"状态 {s}: {DIVERGENCE_NOTE}")
    return VerifiabilityProfile(
        verifiable=is_verifiable(model, security),
        collective=is_collectively_verifiable(model, security),
        maxmin=maxmin,
        threshold=threshold,
        injective=security.is_injective(),
        notes=notes,
    )


# ============================================================
# 见证复核
# ============================================================

def recheck_witness(model: PartitionFrame, security: Security,
                    witness: VerifiabilityWitness, state: Optional[str] = None) -> bool:
    """按原始定义重新检验见证；state 为见证所对应的状态（maxmin/阈值需要）"""
    if witness.kind == KIND_PER_STATE:
        block = model.cell_of(witness.agent, witness.states[0])
        return level_value(security, block) == witness.value
    if witness.kind == KIND_COLLECTIVE:
        pooled = common_refinement(model, witness.states[0])
        return set(witness.states) == set(pooled) and level_value(security, pooled) == witness.value
    if state is None:
        raise ModelInputError(f"复核 {witness.kind} 见证需要给出状态")
    component = reach(model, state)
    values, low, high = values_on(security, component)
    if witness.kind == KIND_CONSTANT:
        return len(values) == 1 and witness.value == low
    if witness.kind == KIND_MAXMIN:
        other = witness.states[0]
        if other not in component:
            return False
        target = high if witness.extreme == "max" else low
        return witness.value == target and level_value(security, model.cell_of(witness.agent, other)) == target
    if witness.kind == KIND_THRESHOLD:
        first, second = witness.states
        if first not in component or second not in component:
            return False
        _, _, upper = values_on(security, model.cell_of(witness.agent, first))
        _, lower, _ = values_on(security, model.cell_of(witness.agent, second))
        return upper < witness.threshold < lower
    raise ModelInputError(f"未知的见证类型: {witness.kind}")
