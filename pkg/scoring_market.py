#!/usr/bin/env python3
"""
市场评分规则交易
严格适当评分规则、短视交易者、价格路径、收益，以及信息聚合判定

短视交易者在严格适当评分规则下总是报告自己的条件期望，因此价格路径与顺序宣布协议的宣布路径逐轮相同。
有限模型上“依概率收敛到 X(ω)”归结为：不动点之后价格恒定且等于 X(真实状态)。
二次评分规则全程使用精确有理数；对数评分规则使用双精度浮点数，误差容限 1e-9。
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from epistemic_core import (
    Model, Security, ModelInputError, PreconditionError, ScoringDomainError,
    expectation, values_on, to_rational, format_rational,
)
from announcement_dynamics import (
    Transcript, STATUS_PASS, STATUS_VIOLATION, STATUS_VACUOUS,
    run_announcements, announce, check_order, terminal_model,
)
from verifiability import Verdict, is_threshold_verifiable

logger = logging.getLogger(__name__)

Score = Union[Fraction, float]
LOG_TOLERANCE = 1e-9


# ============================================================
# 评分规则
# ============================================================

class ScoringRule:
    """评分规则基类 s(y, x)"""

    kind = ""

    def score(self, prediction: Fraction, outcome: Fraction) -> Score:
        raise NotImplementedError

    def expected_scores(self, grid: np.ndarray, values: np.ndarray, probs: np.ndarray) -> np.ndarray:
        """在预测网格上向量化计算期望得分"""
        raise NotImplementedError

    def to_record(self) -> Dict:
        return {"kind": self.kind}


class QuadraticRule(ScoringRule):
    """二次规则 s(y, x) = −(x − y)²"""

    kind = "quadratic"

    def score(self, prediction: Fraction, outcome: Fraction) -> Fraction:
        return -(to_rational(outcome) - to_rational(prediction)) ** 2

    def expected_scores(self, grid, values, probs):
        return -((values[None, :] - grid[:, None]) ** 2) @ probs


class LogarithmicRule(ScoringRule):
    """对数规则 s(y, x) = (x − a)·ln(y − a) + (b − x)·ln(b − y)，要求 a < y < b"""

    kind = "logarithmic"

    def __init__(self, a: Fraction, b: Fraction):
        self.a = to_rational(a)
        self.b = to_rational(b)
        if not self.a < self.b:
            raise ModelInputError(f"对数规则要求 a < b，得到 a={format_rational(self.a)}, b={format_rational(self.b)}")

    def check_covers(self, low: Fraction, high: Fraction) -> None:
        """要求 a < low 且 b > high，使 Y = [low, high] 上的每个预测都有定义"""
        if not (self.a < low and self.b > high):
            raise ModelInputError(
                f"对数规则要求 a < min X = {format_rational(low)} 且 b > max X = {format_rational(high)}，"
                f"得到 a={format_rational(self.a)}, b={format_rational(self.b)}")

    def score(self, prediction: Fraction, outcome: Fraction) -> float:
        y = to_rational(prediction)
        x = to_rational(outcome)
        if not self.a < y < self.b:
            raise ScoringDomainError(
                f"预测 {format_rational(y)} 不在 ({format_rational(self.a)}, {format_rational(self.b)}) 内")
        return float(x - self.a) * math.log(float(y - self.a)) + float(self.b - x) * math.log(float(self.b - y))

    def expected_scores(self, grid, values, probs):
        a = float(self.a)
        b = float(self.b)
        terms = (values[None, :] - a) * np.log(grid[:, None] - a) + (b - values[None, :]) * np.log(b - grid[:, None])
        return terms @ probs

    def to_record(self) -> Dict:
        return {"kind": self.kind, "a": format_rational(self.a), "b": format_rational(self.b)}


def make_rule(kind: str, security: Optional[Security] = None,
              a: Optional[Fraction] = None, b: Optional[Fraction] = None) -> ScoringRule:
    """
    构造评分规则

    对数规则的默认边界为 a = min X − 1, b = max X + 1，并检查 a < min X、b > max X。
    """
    if kind == QuadraticRule.kind:
        return QuadraticRule()
    if kind != LogarithmicRule.kind:
        raise ModelInputError(f"未知的评分规则: {kind}（可选 quadratic / logarithmic）")
    if security is not None:
        _, low, high = values_on(security, security.payoff)
        rule = LogarithmicRule(low - 1 if a is None else a, high + 1 if b is None else b)
        rule.check_covers(low, high)
        return rule
    if a is None or b is None:
        raise ModelInputError("对数规则需要边界 a、b 或一个证券来推导默认边界")
    return LogarithmicRule(a, b)


def score(rule: ScoringRule, prediction: Fraction, outcome: Fraction) -> Score:
    return rule.score(prediction, outcome)


# ============================================================
# 数据模型
# ============================================================

@dataclass
class MarketRun:
    """一次市场运行的记录"""
    true_state: str
    rule: ScoringRule
    y0: Fraction
    schedule: List[str]
    agents: List[str] = field(default_factory=list)
    prices: List[Fraction] = field(default_factory=list)
    payoffs: List[Score] = field(default_factory=list)
    t_star: int = 0
    outcome: Fraction = Fraction(0)
    terminal: str = "constant"
    period: int = 1
    aggregated: bool = False
    transcript: Optional[Transcript] = None

    def to_record(self) -> Dict:
        return {
            "true_state": self.true_state,
            "rule": self.rule.to_record(),
            "y0": format_rational(self.y0),
            "schedule": list(self.schedule),
            "outcome": format_rational(self.outcome),
            "prices": [format_rational(p) for p in self.prices],
            "payoffs": [_format_score(p) for p in self.payoffs],
            "t_star": self.t_star,
            "terminal": {"kind": self.terminal, "period": self.period},
            "aggregated": self.aggregated,
        }


@dataclass
class MarketVerdict:
    """信息聚合推论的检验结果"""
    state: str
    status: str
    threshold: Verdict
    run: MarketRun
    detail: str = ""

    def to_record(self) -> Dict:
        record = {
            "state": self.state,
            "status": self.status,
            "threshold_on_terminal": self.threshold.to_record(),
            "run": self.run.to_record(),
        }
        if self.detail:
            record["detail"] = self.detail
        return record


@dataclass
class ProbeResult:
    """适当性探测：网格上的最优预测与精确期望"""
    argmax: Fraction
    mean: Fraction
    step: Fraction
    within: bool

    def to_record(self) -> Dict:
        return {
            "argmax": format_rational(self.argmax),
            "mean": format_rational(self.mean),
            "step": format_rational(self.step),
            "within": self.within,
        }


def _format_score(value: Score) -> str:
    if isinstance(value, Fraction):
        return format_rational(value)
    return repr(float(value))


# ============================================================
# 交易
# ============================================================

def myopic_prediction(model: Model, security: Security, agent: str, event, state: str) -> Fraction:
    """短视交易者的预测：在 (Π_i(ω) ∩ 信息事件) 上的条件期望"""
    public = model.event(event)
    if not model.cell_of(agent, state) & public:
        raise PreconditionError(f"主体 {agent} 在 {state} 处的信息与事件 {model.ordered(public)} 不相交")
    return expectation(model, security, agent, state, within=public)


def prediction_range(security: Security):
    """Y = [min X(Ω), max X(Ω)]"""
    _, low, high = values_on(security, security.payoff)
    return low, high


def terminal_period(cycle: List[Fraction]) -> int:
    """最后一轮价格的最小周期（必为日程长度的因子）"""
    n = len(cycle)
    for p in range(1, n + 1):
        if n % p == 0 and all(cycle[i] == cycle[(i + p) % n] for i in range(n)):
            return p
    return n


def run_market(model: Model, security: Security, true_state: str, rule: ScoringRule,
               y0: Optional[Fraction] = None, schedule: Optional[Sequence[str]] = None,
               max_cycles: Optional[int] = None) -> MarketRun:
    """
    运行市场评分规则交易

    信息动态与顺序宣布协议一致；不动点之后继续按日程交易，直到共 max_cycles 轮
    （默认 2·|Ω| + 2），以便判别终端价格是恒定还是随日程循环。
    """
    security.validate(model.states)
    schedule = check_order(model, schedule)
    low, high = prediction_range(security)
    y0 = (low + high) / 2 if y0 is None else to_rational(y0)
    if not low <= y0 <= high:
        raise ModelInputError(f"初始预测 {format_rational(y0)} 不在 Y = [{format_rational(low)}, {format_rational(high)}] 内")
    if isinstance(rule, LogarithmicRule):
        rule.check_covers(low, high)
    if max_cycles is None:
        max_cycles = 2 * len(model.states) + 2

    transcript = run_announcements(model, security, true_state, schedule, max_cycles)
    prices = [r.announcement for r in transcript.rounds]
    agents = [r.agent for r in transcript.rounds]
    terminal_public = frozenset(transcript.terminal_public)
    while len(prices) < max_cycles * len(schedule):
        for agent in schedule:
            prices.append(announce(model, security, agent, true_state, terminal_public))
            agents.append(agent)

    for price in prices:
        if not low <= price <= high:
            raise PreconditionError(f"预测 {format_rational(price)} 超出 Y")

    outcome = security(true_state)
    payoffs: List[Score] = []
    previous = y0
    for price in prices:
        payoffs.append(rule.score(price, outcome) - rule.score(previous, outcome))
        previous = price

    last_cycle = prices[-len(schedule):]
    period = terminal_period(last_cycle)
    terminal = "constant" if period == 1 else "cycle"
    aggregated = terminal == "constant" and last_cycle[0] == outcome
    run = MarketRun(
        true_state=true_state, rule=rule, y0=y0, schedule=list(schedule), agents=agents,
        prices=prices, payoffs=payoffs, t_star=transcript.t_star, outcome=outcome,
        terminal=terminal, period=period, aggregated=aggregated, transcript=transcript,
    )
    logger.info(f"状态 {true_state}: 终端价格 {terminal}（周期 {period}），信息聚合 = {aggregated}")
    return run


def telescoping_gap(run: MarketRun) -> Score:
    """Σ 收益 − (s(y_T, x*) − s(y_0, x*))；二次规则精确为 0"""
    total = sum(run.payoffs, Fraction(0) if run.rule.kind == QuadraticRule.kind else 0.0)
    expected = run.rule.score(run.prices[-1], run.outcome) - run.rule.score(run.y0, run.outcome)
    return total - expected


def market_maker_loss(run: MarketRun) -> Score:
    """做市商支付的总额，等于所有交易者收益之和"""
    return sum(run.payoffs, Fraction(0) if run.rule.kind == QuadraticRule.kind else 0.0)


def price_table(run: MarketRun) -> pd.DataFrame:
    """价格路径表：每轮一行 (t, agent, price, payoff)"""
    rows = []
    for t, (agent, price, payoff) in enumerate(zip(run.agents, run.prices, run.payoffs), start=1):
        rows.append({
            "t": t,
            "agent": agent,
            "price": format_rational(price),
            "payoff": _format_score(payoff),
        })
    return pd.DataFrame(rows, columns=["t", "agent", "price", "payoff"])


def check_corollary2(model: Model, security: Security, state: str, rule: ScoringRule,
                     schedule: Optional[Sequence[str]] = None,
                     y0: Optional[Fraction] = None) -> MarketVerdict:
    """终端公共信息上阈值可验证 ⇒ 信息聚合"""
    run = run_market(model, security, state, rule, y0=y0, schedule=schedule)
    restricted, restricted_security = terminal_model(model, security, run.transcript)
    threshold = is_threshold_verifiable(restricted, restricted_security, state)
    if not threshold.holds:
        return MarketVerdict(state, STATUS_VACUOUS, threshold, run)
    if run.aggregated:
        return MarketVerdict(state, STATUS_PASS, threshold, run)
    detail = f"终端阈值可验证但价格没有收敛到 X({state}) = {format_rational(run.outcome)}"
    logger.warning(detail)
    return MarketVerdict(state, STATUS_VIOLATION, threshold, run, detail)


# ============================================================
# 适当性探测
# ============================================================

def properness_probe(rule: ScoringRule, distribution: Dict[Fraction, Fraction],
                     step: Fraction = Fraction(1, 1000)) -> ProbeResult:
    """
    在 Y 的网格上寻找期望得分最大的预测

    distribution: 收益值 -> 概率（全支撑、和为 1）。结果应在精确期望的一个步长之内。
    """
    step = to_rational(step)
    if step <= 0:
        raise ModelInputError("网格步长必须为正")
    support = sorted(to_rational(v) for v in distribution)
    probs = [to_rational(distribution[v]) for v in distribution]
    if any(p <= 0 for p in probs) or sum(probs) != 1:
        raise ModelInputError("分布必须全支撑且概率之和为 1")
    mean = sum((to_rational(v) * to_rational(p) for v, p in distribution.items()), Fraction(0))
    low, high = support[0], support[-1]

    count = int((high - low) / step)
    offsets = [low + step * i for i in range(count + 1)]
    if offsets[-1] != high:
        offsets.append(high)
    grid = np.array([float(y) for y in offsets])
    values = np.array([float(to_rational(v)) for v in distribution])
    weights = np.array([float(p) for p in probs])
    best = int(np.argmax(rule.expected_scores(grid, values, weights)))
    argmax = offsets[best]
    return ProbeResult(argmax, mean, step, abs(argmax - mean) <= step)
