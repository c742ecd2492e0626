#!/usr/bin/env python3
"""
顺序公开宣布协议
主体按日程依次公开宣布自己的条件期望，公共信息随之细化，直到不动点 t*，再判断是否达成一致

轮次编号：C^0 = Ω 在任何宣布之前；第 t 次宣布后得到 C^t。
日程按“轮”循环执行（每轮把日程走一遍）；第一次出现整轮没有细化时停止，
t* 为该静默轮之前的宣布次数。静默轮本身也记入记录，其宣布即最终期望。
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from epistemic_core import (
    Event, Model, Security, ModelInputError, PreconditionError,
    expectation, format_rational,
)
from verifiability import Verdict, is_threshold_verifiable, is_maxmin_verifiable

logger = logging.getLogger(__name__)

STATUS_PASS = "pass"
STATUS_VIOLATION = "violation"
STATUS_VACUOUS = "vacuous"


# ============================================================
# 数据模型
# ============================================================

@dataclass
class Round:
    """一次宣布"""
    t: int
    agent: str
    announcement: Fraction
    public: List[str]

    def to_record(self) -> Dict:
        return {
            "t": self.t,
            "agent": self.agent,
            "announcement": format_rational(self.announcement),
            "public": list(self.public),
        }


@dataclass
class Transcript:
    """宣布过程的完整记录"""
    true_state: str
    order: List[str]
    states: List[str] = field(default_factory=list)
    rounds: List[Round] = field(default_factory=list)
    t_star: int = 0
    final_expectations: Dict[str, Fraction] = field(default_factory=dict)
    agree: bool = True

    def public_at(self, t: int) -> List[str]:
        """C^t；t = 0 时为整个状态空间"""
        if t == 0:
            return list(self.states)
        return self.rounds[t - 1].public

    @property
    def terminal_public(self) -> List[str]:
        return self.public_at(self.t_star)

    def to_record(self) -> Dict:
        return {
            "true_state": self.true_state,
            "order": list(self.order),
            "rounds": [r.to_record() for r in self.rounds],
            "t_star": self.t_star,
            "terminal_public": list(self.terminal_public),
            "final_expectations": {a: format_rational(e) for a, e in self.final_expectations.items()},
            "agree": self.agree,
        }


@dataclass
class CorollaryVerdict:
    """推论检验：终端公共信息上阈值可验证时，结论必须成立"""
    state: str
    status: str
    threshold: Verdict
    transcript: Transcript
    detail: str = ""

    def to_record(self) -> Dict:
        record = {
            "state": self.state,
            "status": self.status,
            "threshold_on_terminal": self.threshold.to_record(),
            "transcript": self.transcript.to_record(),
        }
        if self.detail:
            record["detail"] = self.detail
        return record


# ============================================================
# 协议
# ============================================================

def default_order(model: Model) -> List[str]:
    """默认日程：按模型中的主体顺序轮流发言"""
    return list(model.agents)


def check_order(model: Model, order: Optional[Sequence[str]]) -> List[str]:
    if order is None:
        return default_order(model)
    order = [str(a) for a in order]
    if not order:
        raise ModelInputError("发言日程不能为空")
    for agent in order:
        model.check_agent(agent)
    missing = [a for a in model.agents if a not in order]
    if missing:
        raise ModelInputError(f"发言日程没有包含主体: {missing}")
    return order


def announce(model: Model, security: Security, agent: str, state: str, public: Event) -> Fraction:
    """主体在 state 处、公共信息为 public 时会宣布的值"""
    return expectation(model, security, agent, state, within=public)


def run_announcements(model: Model, security: Security, true_state: str,
                      order: Optional[Sequence[str]] = None,
                      max_cycles: Optional[int] = None) -> Transcript:
    """运行顺序宣布协议直到整轮没有细化"""
    security.validate(model.states)
    model.check_state(true_state)
    order = check_order(model, order)
    if max_cycles is None:
        max_cycles = len(model.states) + 1

    transcript = Transcript(true_state, order, list(model.states))
    public = model.omega
    t = 0
    for cycle in range(1, max_cycles + 1):
        start = t
        refined = False
        for agent in order:
            t += 1
            value = announce(model, security, agent, true_state, public)
            # 只保留该主体会做出相同宣布的状态
            kept = frozenset(
                s for s in public
                if announce(model, security, agent, s, public) == value
            )
            if kept != public:
                refined = True
                public = kept
            transcript.rounds.append(Round(t, agent, value, model.ordered(public)))
        if not refined:
            transcript.t_star = start
            break
        logger.debug(f"第 {cycle} 轮后公共信息: {model.ordered(public)}")
    else:
        raise PreconditionError(f"{max_cycles} 轮内没有到达不动点")

    silent = transcript.rounds[transcript.t_star:]
    transcript.final_expectations = {}
    for r in silent:
        transcript.final_expectations[r.agent] = r.announcement
    transcript.final_expectations = {a: transcript.final_expectations[a] for a in model.agents}
    transcript.agree = len(set(transcript.final_expectations.values())) == 1
    logger.info(
        f"状态 {true_state}: t* = {transcript.t_star}, "
        f"终端公共信息 {transcript.terminal_public}, 一致 = {transcript.agree}"
    )
    return transcript


def cannot_disagree_forever(model: Model, security: Security, state: str,
                            order: Optional[Sequence[str]] = None) -> bool:
    """不动点处所有主体的期望是否相同"""
    return run_announcements(model, security, state, order).agree


def terminal_model(model: Model, security: Security, transcript: Transcript):
    """限制到终端公共信息 C^{t*} 上的模型与证券"""
    public = transcript.terminal_public
    return model.restrict(public), security.restrict(public)


def check_corollary1(model: Model, security: Security, state: str,
                     order: Optional[Sequence[str]] = None) -> CorollaryVerdict:
    """终端公共信息上阈值可验证 ⇒ 不会永远分歧"""
    transcript = run_announcements(model, security, state, order)
    restricted, restricted_security = terminal_model(model, security, transcript)
    threshold = is_threshold_verifiable(restricted, restricted_security, state)
    if not threshold.holds:
        return CorollaryVerdict(state, STATUS_VACUOUS, threshold, transcript)
    if transcript.agree:
        return CorollaryVerdict(state, STATUS_PASS, threshold, transcript)
    detail = f"终端阈值可验证但期望不一致: { {a: format_rational(e) for a, e in transcript.final_expectations.items()} }"
    logger.warning(f"状态 {state}: {detail}")
    return CorollaryVerdict(state, STATUS_VIOLATION, threshold, transcript, detail)


def maxmin_path(model: Model, security: Security, transcript: Transcript) -> List[bool]:
    """每个 C^t（t = 0 … 记录末尾）上 maxmin 可验证性的判定"""
    result = []
    for t in range(len(transcript.rounds) + 1):
        public = transcript.public_at(t)
        restricted = model.restrict(public)
        result.append(is_maxmin_verifiable(restricted, security.restrict(public), transcript.true_state).holds)
    return result
