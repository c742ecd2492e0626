#!/usr/bin/env python3
"""
穷举与随机检验
小状态空间上枚举所有分区组合，以及固定种子的随机共同先验模型，批量检验等价定理、
推论、评分规则适当性和多证券命题；结果按固定顺序汇总，只保留第一个反例
"""

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from epistemic_core import (
    Model, NoTradeError, Partition, PartitionFrame, Prior, Security,
    build_model, cell, uniform_prior, expectation, format_rational,
)
from agreement import (
    ck_trade_possible, synthesize_disagreement_priors, verify_theorem_on, random_prior,
)
from announcement_dynamics import (
    STATUS_PASS, STATUS_VIOLATION, run_announcements, check_corollary1,
)
from scoring_market import (
    LOG_TOLERANCE, make_rule, check_corollary2, telescoping_gap, properness_probe,
)
from multi_security import (
    STATUS_NOT_APPLICABLE, SecurityBundle, split_security, is_tradable,
    detect_ck_trade_multi, verify_proposition_on,
)

logger = logging.getLogger(__name__)


# ============================================================
# 汇总
# ============================================================

@dataclass
class HarnessSummary:
    """一组检验的汇总：各状态计数、违反数和第一个反例"""
    name: str
    checks: int = 0
    violations: int = 0
    statuses: Dict[str, int] = field(default_factory=dict)
    first_counterexample: Optional[Dict] = None

    @property
    def holds(self) -> bool:
        return self.violations == 0

    def record(self, status: str, instance: Optional[Dict] = None) -> None:
        self.checks += 1
        self.statuses[status] = self.statuses.get(status, 0) + 1
        if status == STATUS_VIOLATION:
            self.violations += 1
            if self.first_counterexample is None and instance is not None:
                self.first_counterexample = instance
                logger.warning(f"[{self.name}] 发现反例: {instance}")

    def to_record(self) -> Dict:
        record = {
            "name": self.name,
            "checks": self.checks,
            "violations": self.violations,
            "statuses": dict(sorted(self.statuses.items())),
            "holds": self.holds,
        }
        if self.first_counterexample is not None:
            record["first_counterexample"] = self.first_counterexample
        return record


def describe_instance(frame: PartitionFrame, security: Security, state: str,
                      priors: Optional[Dict[str, Prior]] = None, **extra) -> Dict:
    instance = {
        "states": list(frame.states),
        "partitions": {a: [frame.ordered(b) for b in frame.cells_within(a, frame.omega)] for a in frame.agents},
        "security": {s: format_rational(security(s)) for s in frame.states},
        "state": state,
    }
    if priors:
        instance["priors"] = {a: {s: format_rational(p[s]) for s in frame.states} for a, p in priors.items()}
    instance.update(extra)
    return instance


# ============================================================
# 实例生成
# ============================================================

def state_names(n: int) -> Tuple[str, ...]:
    return tuple(f"w{i}" for i in range(1, n + 1))


def set_partitions(items: Sequence[str]) -> Iterator[List[List[str]]]:
    """按规范顺序生成集合的全部分区（个数为 Bell 数）"""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in set_partitions(rest):
        yield [[first]] + smaller
        for i in range(len(smaller)):
            yield smaller[:i] + [[first] + smaller[i]] + smaller[i + 1:]


def injective_security(states: Sequence[str]) -> Security:
    """X = (1, …, |Ω|)"""
    return Security.from_values(states, range(1, len(states) + 1))


def enumerate_frames(n_states: int, n_agents: int = 2) -> Iterator[PartitionFrame]:
    """所有 n_agents 个主体的分区组合"""
    states = state_names(n_states)
    partitions = list(set_partitions(states))
    agents = tuple(str(i) for i in range(1, n_agents + 1))

    def combos(k: int) -> Iterator[List[List[List[str]]]]:
        if k == 0:
            yield []
            return
        for head in partitions:
            for tail in combos(k - 1):
                yield [head] + tail

    for combo in combos(n_agents):
        yield PartitionFrame(states, agents, {a: Partition.from_lists(p) for a, p in zip(agents, combo)})


def random_partition(states: Sequence[str], rng: random.Random) -> Partition:
    labels = {}
    for s in states:
        labels.setdefault(rng.randrange(len(states)), []).append(s)
    return Partition.from_lists(labels[k] for k in sorted(labels))


def random_security(states: Sequence[str], rng: random.Random) -> Security:
    return Security.from_values(states, [Fraction(rng.randint(-6, 6), rng.randint(1, 3)) for _ in states])


def random_common_prior_model(rng: random.Random, max_states: int = 6, max_agents: int = 3) -> Model:
    """随机分区、随机有理共同先验"""
    states = state_names(rng.randint(2, max_states))
    agents = tuple(str(i) for i in range(1, rng.randint(2, max_agents) + 1))
    partitions = {a: random_partition(states, rng) for a in agents}
    prior = random_prior(states, rng)
    return Model(states, agents, partitions, {a: prior for a in agents})


def instance_rng(seed: int, index: int) -> random.Random:
    """每个实例独立的随机源，汇总结果与执行顺序无关"""
    return random.Random(seed * 1_000_003 + index)


def priors_for_corollaries(frame: PartitionFrame, security: Security, state: str) -> Dict[str, Prior]:
    """可能交易时取合成的分歧先验，否则取均匀先验"""
    if ck_trade_possible(frame, security, state).possible:
        return synthesize_disagreement_priors(frame, security, state).priors
    return {a: uniform_prior(frame.states) for a in frame.agents}


# ============================================================
# 检验
# ============================================================

def check_theorem_enumeration(sizes: Sequence[int] = (2, 3, 4)) -> HarnessSummary:
    """两主体、单射 X 的所有分区组合上：阈值可验证 XOR 可能交易，且合成先验被检测确认"""
    summary = HarnessSummary("theorem")
    for n in sizes:
        security = injective_security(state_names(n))
        for frame in enumerate_frames(n):
            for state in frame.states:
                verdict = verify_theorem_on(frame, security, state)
                status = STATUS_PASS if verdict.holds else STATUS_VIOLATION
                summary.record(status, describe_instance(frame, security, state, note=verdict.note))
        logger.info(f"|Ω| = {n}: 累计 {summary.checks} 项检验，违反 {summary.violations}")
    return summary


def check_common_prior_agreement(instances: int = 500, seed: int = 0,
                                 max_states: int = 6, max_agents: int = 3) -> HarnessSummary:
    """共同先验下宣布过程在 t* 处必然一致"""
    summary = HarnessSummary("common-prior-agreement")
    for index in range(instances):
        model = random_common_prior_model(instance_rng(seed, index), max_states, max_agents)
        security = random_security(model.states, instance_rng(seed, index + instances))
        for state in model.states:
            transcript = run_announcements(model, security, state)
            status = STATUS_PASS if transcript.agree else STATUS_VIOLATION
            summary.record(status, describe_instance(model, security, state, model.priors, index=index))
    logger.info(f"共同先验一致性: {summary.checks} 项检验，违反 {summary.violations}")
    return summary


def _check_corollaries_on(model: Model, security: Security, state: str,
                          corollary1: HarnessSummary, corollary2: HarnessSummary,
                          telescoping: HarnessSummary, **extra) -> None:
    instance = describe_instance(model, security, state, model.priors, **extra)
    corollary1.record(check_corollary1(model, security, state).status, instance)
    for kind in ("quadratic", "logarithmic"):
        rule = make_rule(kind, security)
        verdict = check_corollary2(model, security, state, rule)
        corollary2.record(verdict.status, dict(instance, rule=kind))
        gap = telescoping_gap(verdict.run)
        exact = gap == 0 if kind == "quadratic" else abs(gap) <= LOG_TOLERANCE
        telescoping.record(STATUS_PASS if exact else STATUS_VIOLATION, dict(instance, rule=kind, gap=str(gap)))


def check_corollaries(sizes: Sequence[int] = (2, 3, 4), instances: int = 500,
                      seed: int = 0, max_states: int = 6, max_agents: int = 3) -> List[HarnessSummary]:
    """
    枚举与随机实例上检验两个推论与收益伸缩恒等式

    Returns:
        [corollary1, corollary2, telescoping] 三个汇总；vacuous 表示终端公共信息上阈值不可验证
    """
    corollary1 = HarnessSummary("corollary1")
    corollary2 = HarnessSummary("corollary2")
    telescoping = HarnessSummary("telescoping")
    for n in sizes:
        security = injective_security(state_names(n))
        for frame in enumerate_frames(n):
            for state in frame.states:
                model = build_model(frame, priors_for_corollaries(frame, security, state))
                _check_corollaries_on(model, security, state, corollary1, corollary2, telescoping)
    for index in range(instances):
        model = random_common_prior_model(instance_rng(seed, index), max_states, max_agents)
        security = random_security(model.states, instance_rng(seed, index + instances))
        state = model.states[index % len(model.states)]
        _check_corollaries_on(model, security, state, corollary1, corollary2, telescoping, index=index)
    logger.info(
        f"推论检验: 推论1 违反 {corollary1.violations}，推论2 违反 {corollary2.violations}，"
        f"伸缩恒等式违反 {telescoping.violations}"
    )
    return [corollary1, corollary2, telescoping]


def check_properness(count: int = 100, seed: int = 0, step: Fraction = Fraction(1, 1000)) -> HarnessSummary:
    """随机分布（至多 6 个收益值）上网格最优预测与精确期望相差不超过一个步长"""
    summary = HarnessSummary("properness")
    for index in range(count):
        rng = instance_rng(seed, index)
        values = sorted({Fraction(rng.randint(-5, 5), rng.randint(1, 2)) for _ in range(rng.randint(1, 6))})
        weights = [rng.randint(1, 9) for _ in values]
        distribution = {v: Fraction(w, sum(weights)) for v, w in zip(values, weights)}
        security = Security({f"v{i}": v for i, v in enumerate(values)})
        for kind in ("quadratic", "logarithmic"):
            result = properness_probe(make_rule(kind, security), distribution, step)
            instance = {
                "rule": kind,
                "distribution": {format_rational(v): format_rational(p) for v, p in distribution.items()},
                "probe": result.to_record(),
            }
            summary.record(STATUS_PASS if result.within else STATUS_VIOLATION, instance)
    logger.info(f"适当性探测: {summary.checks} 项检验，违反 {summary.violations}")
    return summary


def proposition_bundle(frame: PartitionFrame, security: Security, state: str) -> Optional[SecurityBundle]:
    """
    由单证券拆分出证券组

    可能交易时在合成目标处拆分，否则在均匀先验下的期望处拆分；分界处期望相同则返回 None。
    """
    if ck_trade_possible(frame, security, state).possible:
        expectations = synthesize_disagreement_priors(frame, security, state).targets
    else:
        model = build_model(frame, {a: uniform_prior(frame.states) for a in frame.agents})
        expectations = {a: expectation(model, security, a, state) for a in frame.agents}
    try:
        bundle, _ = split_security(security, expectations)
    except NoTradeError:
        return None
    return bundle


def check_proposition_enumeration(sizes: Sequence[int] = (2, 3, 4),
                                  extra: Sequence[Tuple[PartitionFrame, SecurityBundle]] = ()) -> HarnessSummary:
    """拆分得到的两主体证券组上：组阈值可验证 XOR 存在使期望利润全为正常数的先验"""
    summary = HarnessSummary("proposition")
    cases: List[Tuple[PartitionFrame, SecurityBundle, str]] = []
    for n in sizes:
        security = injective_security(state_names(n))
        for frame in enumerate_frames(n):
            for state in frame.states:
                bundle = proposition_bundle(frame, security, state)
                if bundle is None:
                    summary.statuses["skipped-tie"] = summary.statuses.get("skipped-tie", 0) + 1
                    continue
                cases.append((frame, bundle, state))
    for frame, bundle in extra:
        cases.extend((frame, bundle, state) for state in frame.states)
    for frame, bundle, state in cases:
        verdict = verify_proposition_on(frame, bundle, state)
        instance = describe_instance(frame, Security({s: Fraction(0) for s in frame.states}), state,
                                     bundle=bundle.to_record())
        summary.record(verdict.status, instance)
    logger.info(
        f"多证券命题: {summary.checks} 项检验，违反 {summary.violations}，"
        f"不适用 {summary.statuses.get(STATUS_NOT_APPLICABLE, 0)}"
    )
    return summary


def tradable_pair_security(frame: PartitionFrame, rng: random.Random,
                           first: str = "1", second: str = "2") -> Optional[Security]:
    """
    构造使 (X, -X) 可交易的证券：first 的每个块上有 X > 0 的状态，second 的每个块上有 X < 0 的状态

    先在 second 的每个块里选一个负状态（优先选不会占满 first 某个块的状态），再在 first 的每个块里
    从剩余状态中选一个正状态；某个 first 块的状态全被选为负时返回 None。
    """
    negative = set()
    for block in frame.cells_within(second, frame.omega):
        members = frame.ordered(block)
        roomy = [s for s in members if cell(frame, first, s) - negative - {s}] or members
        negative.add(rng.choice(roomy))
    positive = set()
    for block in frame.cells_within(first, frame.omega):
        free = [s for s in frame.ordered(block) if s not in negative]
        if not free:
            return None
        positive.add(rng.choice(free))
    values = {}
    for s in frame.states:
        magnitude = Fraction(rng.randint(1, 6), rng.randint(1, 3))
        if s in positive:
            values[s] = magnitude
        elif s in negative:
            values[s] = -magnitude
        else:
            values[s] = Fraction(rng.randint(-6, 6), rng.randint(1, 3))
    return Security(values)


def check_common_prior_multi(instances: int = 500, seed: int = 0,
                             max_states: int = 6, attempts: int = 20) -> HarnessSummary:
    """共同先验下可交易证券组永远不会出现多证券公共知识交易（证券组按构造可交易）"""
    summary = HarnessSummary("common-prior-multi")
    for index in range(instances):
        rng = instance_rng(seed, index)
        for _ in range(attempts):
            model = random_common_prior_model(rng, max_states, max_agents=2)
            security = tradable_pair_security(model, rng)
            if security is not None:
                break
        else:
            summary.statuses["not-tradable"] = summary.statuses.get("not-tradable", 0) + 1
            continue
        bundle = SecurityBundle({"1": security, "2": -security})
        if not is_tradable(bundle, model).holds:
            summary.record(STATUS_VIOLATION, describe_instance(model, security, model.states[0], model.priors,
                                                              index=index, detail="not-tradable"))
            continue
        for state in model.states:
            report = detect_ck_trade_multi(model, bundle, state)
            status = STATUS_PASS if report is None else STATUS_VIOLATION
            summary.record(status, describe_instance(model, security, state, model.priors, index=index))
    return summary


def run_all(sizes: Sequence[int] = (2, 3, 4), instances: int = 500, seed: int = 0,
            max_states: int = 6, max_agents: int = 3, probes: int = 100,
            step: Fraction = Fraction(1, 1000)) -> List[HarnessSummary]:
    """按固定顺序运行全部检验"""
    summaries = [check_theorem_enumeration(sizes),
                 check_common_prior_agreement(instances, seed, max_states, max_agents)]
    summaries.extend(check_corollaries(sizes, instances, seed, max_states, max_agents))
    summaries.append(check_properness(probes, seed, step))
    summaries.append(check_proposition_enumeration(sizes))
    summaries.append(check_common_prior_multi(instances, seed, max_states))
    return summaries


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    summaries = run_all()
    print("=" * 60)
    for summary in summaries:
        mark = "✓" if summary.holds else "✗"
        print(f"{mark} {summary.name}: {summary.checks} 项检验，违反 {summary.violations}，{summary.statuses}")
    print("=" * 60)
    return 0 if all(s.holds for s in summaries) else 1


if __name__ == "__main__":
    raise SystemExit(main())
