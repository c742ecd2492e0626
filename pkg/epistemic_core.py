#!/usr/bin/env python3
"""
有限分区信息模型核心模块
状态空间、各主体的信息分区、先验、证券，以及知识、可达集（公共知识）与条件期望

所有概率与收益均使用精确有理数（fractions.Fraction），本模块内不做任何舍入。
状态的顺序在构造时固定，之后所有遍历与序列化都按该规范顺序进行。
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple, Union

logger = logging.getLogger(__name__)

Event = FrozenSet[str]
RationalLike = Union[Fraction, int, str]


# ============================================================
# 异常
# ============================================================

class NoTradeError(Exception):
    """本项目所有异常的基类"""


class ModelInputError(NoTradeError, ValueError):
    """输入错误：未知的主体/状态标识、结构不合法、空事件等"""


class PreconditionError(NoTradeError, ValueError):
    """操作前置条件不满足"""


class ScoringDomainError(NoTradeError, ValueError):
    """评分规则的定义域错误"""


# ============================================================
# 有理数工具
# ============================================================

def to_rational(value: RationalLike) -> Fraction:
    """
    转换为精确有理数

    接受 Fraction、int 以及 "a/b"、"3"、"-0.25" 形式的字符串。
    浮点数会带入二进制误差，因此直接拒绝。
    """
    if isinstance(value, bool):
        raise ModelInputError(f"无法把布尔值 {value!r} 当作有理数")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ModelInputError(f"无效的有理数字符串: {value!r}")
    raise ModelInputError(f"不支持的数值类型 {type(value).__name__}: {value!r}（请使用 \"a/b\" 字符串）")


def format_rational(value: Fraction) -> str:
    """规范的有理数文本形式："a/b"，整数时为 "a" """
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


# ============================================================
# 并查集
# ============================================================

class UnionFind:
    """
    并查集（按秩合并 + 路径压缩）

    用于计算“共享任一主体分区块”这一关系的连通分量，即可达集 C(ω)。
    """

    def __init__(self, items: Iterable[str] = ()):
        self.parent: Dict[str, str] = {}
        self.rank: Dict[str, int] = Counter()
        for item in items:
            self.find(item)

    def find(self, x: str) -> str:
        try:
            if self.parent[x] != x:
                self.parent[x] = self.find(self.parent[x])
        except KeyError:
            self.parent[x] = x
        return self.parent[x]

    def union(self, x: str, y: str) -> None:
        px = self.find(x)
        py = self.find(y)
        if px == py:
            return
        if self.rank[px] == self.rank[py]:
            self.parent[py] = px
            self.rank[px] += 1
        elif self.rank[px] > self.rank[py]:
            self.parent[py] = px
        else:
            self.parent[px] = py

    def groups(self) -> Dict[str, List[str]]:
        """根 -> 成员列表（成员保持插入顺序）"""
        result: Dict[str, List[str]] = {}
        for item in self.parent:
            result.setdefault(self.find(item), []).append(item)
        return result


# ============================================================
# 数据模型
# ============================================================

@dataclass(frozen=True)
class Partition:
    """某个主体的信息分区：互不相交、非空、覆盖状态空间的块"""
    blocks: Tuple[Event, ...]

    @classmethod
    def from_lists(cls, blocks: Iterable[Iterable[str]]) -> "Partition":
        return cls(tuple(frozenset(b) for b in blocks))

    def validate(self, states: Tuple[str, ...], agent: str = "") -> None:
        """检查分区性质，不满足时抛出 ModelInputError"""
        seen = set()
        for block in self.blocks:
            if not block:
                raise ModelInputError(f"主体 {agent} 的分区含有空块")
            unknown = block - set(states)
            if unknown:
                raise ModelInputError(f"主体 {agent} 的分区引用了未知状态: {sorted(unknown)}")
            overlap = block & seen
            if overlap:
                raise ModelInputError(f"主体 {agent} 的分区块重叠: {sorted(overlap)}")
            seen |= block
        missing = [s for s in states if s not in seen]
        if missing:
            raise ModelInputError(f"主体 {agent} 的分区未覆盖状态: {missing}")


@dataclass(frozen=True)
class Prior:
    """先验：每个状态的质量严格为正，总和恰好为 1"""
    mass: Dict[str, Fraction]

    def __getitem__(self, state: str) -> Fraction:
        return self.mass[state]

    def of(self, event: Iterable[str]) -> Fraction:
        return sum((self.mass[s] for s in event), Fraction(0))

    def validate(self, states: Tuple[str, ...], agent: str = "") -> None:
        missing = [s for s in states if s not in self.mass]
        if missing:
            raise ModelInputError(f"主体 {agent} 的先验缺少状态: {missing}")
        unknown = [s for s in self.mass if s not in states]
        if unknown:
            raise ModelInputError(f"主体 {agent} 的先验引用了未知状态: {unknown}")
        for s in states:
            if self.mass[s] <= 0:
                raise ModelInputError(f"主体 {agent} 的先验在 {s} 处不是严格正的: {format_rational(self.mass[s])}")
        total = self.of(states)
        if total != 1:
            raise ModelInputError(f"主体 {agent} 的先验总和为 {format_rational(total)}，不等于 1")


@dataclass(frozen=True)
class Security:
    """证券：状态 -> 收益（精确有理数）"""
    payoff: Dict[str, Fraction]
    name: str = "X"

    @classmethod
    def from_values(cls, states: Iterable[str], values: Iterable[RationalLike], name: str = "X") -> "Security":
        states = list(states)
        values = list(values)
        if len(states) != len(values):
            raise ModelInputError(f"证券 {name}: 状态数 {len(states)} 与收益数 {len(values)} 不一致")
        return cls({s: to_rational(v) for s, v in zip(states, values)}, name)

    def __call__(self, state: str) -> Fraction:
        try:
            return self.payoff[state]
        except KeyError:
            raise ModelInputError(f"证券 {self.name} 在状态 {state!r} 上没有定义")

    def validate(self, states: Tuple[str, ...]) -> None:
        missing = [s for s in states if s not in self.payoff]
        if missing:
            raise ModelInputError(f"证券 {self.name} 缺少状态的收益: {missing}")

    def is_injective(self) -> bool:
        return len(set(self.payoff.values())) == len(self.payoff)

    def duplicated_payoff(self) -> Optional[Tuple[Fraction, List[str]]]:
        """返回第一个重复的收益值及其状态，单射时返回 None"""
        by_value: Dict[Fraction, List[str]] = {}
        for s, v in self.payoff.items():
            by_value.setdefault(v, []).append(s)
        for v, states in by_value.items():
            if len(states) > 1:
                return v, states
        return None

    def restrict(self, event: Iterable[str]) -> "Security":
        event = set(event)
        return Security({s: v for s, v in self.payoff.items() if s in event}, self.name)

    def __neg__(self) -> "Security":
        return Security({s: -v for s, v in self.payoff.items()}, f"-{self.name}")

    def shifted(self, amount: Fraction, name: Optional[str] = None) -> "Security":
        """X + amount（amount 为常数证券）"""
        return Security({s: v + amount for s, v in self.payoff.items()}, name or self.name)


@dataclass(frozen=True)
class PartitionFrame:
    """
    不含先验的分区结构：状态空间、主体列表和每个主体的分区

    可达集与交易可行性判定只依赖这一部分，从不读取先验。
    """
    states: Tuple[str, ...]
    agents: Tuple[str, ...]
    partitions: Dict[str, Partition]
    _cells: Dict[str, Dict[str, Event]] = field(init=False, repr=False, compare=False)
    _components: Dict[str, Event] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "agents", tuple(self.agents))
        if not self.states:
            raise ModelInputError("状态空间不能为空")
        if len(set(self.states)) != len(self.states):
            raise ModelInputError(f"状态标识重复: {self.states}")
        if not self.agents:
            raise ModelInputError("至少需要一个主体")
        if len(set(self.agents)) != len(self.agents):
            raise ModelInputError(f"主体标识重复: {self.agents}")
        if set(self.partitions) != set(self.agents):
            raise ModelInputError(f"分区的主体 {sorted(self.partitions)} 与主体列表 {list(self.agents)} 不一致")

        cells: Dict[str, Dict[str, Event]] = {}
        for agent in self.agents:
            partition = self.partitions[agent]
            partition.validate(self.states, agent)
            cells[agent] = {s: block for block in partition.blocks for s in block}
        object.__setattr__(self, "_cells", cells)

        # 共享分区块的状态连成一个分量
        uf = UnionFind(self.states)
        for agent in self.agents:
            for block in self.partitions[agent].blocks:
                ordered = self.ordered(block)
                for s in ordered[1:]:
                    uf.union(ordered[0], s)
        components = {}
        for members in uf.groups().values():
            component = frozenset(members)
            for s in members:
                components[s] = component
        object.__setattr__(self, "_components", components)

    # ------ 标识校验 ------

    def check_state(self, state: str) -> None:
        if state not in self._components:
            raise ModelInputError(f"未知状态: {state!r}")

    def check_agent(self, agent: str) -> None:
        if agent not in self._cells:
            raise ModelInputError(f"未知主体: {agent!r}")

    def event(self, states: Iterable[str]) -> Event:
        """构造事件并校验其成员都在状态空间内"""
        members = frozenset(states)
        unknown = [s for s in members if s not in self._components]
        if unknown:
            raise ModelInputError(f"事件包含未知状态: {sorted(unknown)}")
        return members

    def ordered(self, event: Iterable[str]) -> List[str]:
        """按规范状态顺序排列事件成员"""
        event = set(event)
        return [s for s in self.states if s in event]

    @property
    def omega(self) -> Event:
        return frozenset(self.states)

    def cell_of(self, agent: str, state: str) -> Event:
        self.check_agent(agent)
        self.check_state(state)
        return self._cells[agent][state]

    def component_of(self, state: str) -> Event:
        self.check_state(state)
        return self._components[state]

    def cells_within(self, agent: str, event: Iterable[str]) -> List[Event]:
        """主体在事件内遇到的分区块（按首个状态的规范顺序，去重）"""
        self.check_agent(agent)
        result: List[Event] = []
        for s in self.ordered(event):
            block = self._cells[agent][s]
            if block not in result:
                result.append(block)
        return result

    def restrict(self, event: Iterable[str]) -> "PartitionFrame":
        event = self.event(event)
        if not event:
            raise ModelInputError("不能限制到空事件")
        states = tuple(self.ordered(event))
        partitions = {a: _restrict_partition(self.partitions[a], event, self) for a in self.agents}
        return PartitionFrame(states, self.agents, partitions)


@dataclass(frozen=True)
class Model(PartitionFrame):
    """完整模型：分区结构加上每个主体的全支撑先验"""
    priors: Dict[str, Prior] = field(default_factory=dict)

    def __post_init__(self):
        super().__post_init__()
        if set(self.priors) != set(self.agents):
            raise ModelInputError(f"先验的主体 {sorted(self.priors)} 与主体列表 {list(self.agents)} 不一致")
        for agent in self.agents:
            self.priors[agent].validate(self.states, agent)

    @property
    def frame(self) -> PartitionFrame:
        return PartitionFrame(self.states, self.agents, self.partitions)

    def restrict(self, event: Iterable[str]) -> "Model":
        """限制到事件上：分区块与事件取交，先验按事件条件化"""
        event = self.event(event)
        if not event:
            raise ModelInputError("不能限制到空事件")
        states = tuple(self.ordered(event))
        partitions = {a: _restrict_partition(self.partitions[a], event, self) for a in self.agents}
        priors = {}
        for agent in self.agents:
            prior = self.priors[agent]
            total = prior.of(states)
            priors[agent] = Prior({s: prior[s] / total for s in states})
        return Model(states, self.agents, partitions, priors)


def _restrict_partition(partition: Partition, event: Event, frame: PartitionFrame) -> Partition:
    blocks = []
    for block in partition.blocks:
        kept = block & event
        if kept:
            blocks.append(kept)
    blocks.sort(key=lambda b: frame.states.index(frame.ordered(b)[0]))
    return Partition(tuple(blocks))


def build_model(frame: PartitionFrame, priors: Dict[str, Prior]) -> Model:
    """把分区结构与一组先验组装成模型"""
    return Model(frame.states, frame.agents, frame.partitions, priors)


def uniform_prior(states: Iterable[str]) -> Prior:
    states = list(states)
    return Prior({s: Fraction(1, len(states)) for s in states})


# ============================================================
# 知识与公共知识
# ============================================================

def cell(model: PartitionFrame, agent: str, state: str) -> Event:
    """主体在 state 处收到的私人信息 Π_i(ω)"""
    return model.cell_of(agent, state)


def knows(model: PartitionFrame, agent: str, event: Iterable[str], state: str) -> bool:
    """主体在 state 处知道事件，当且仅当 Π_i(ω) ⊆ E"""
    event = model.event(event)
    return model.cell_of(agent, state) <= event


def reach(model: PartitionFrame, state: str) -> Event:
    """可达集 C(ω)：包含 ω 的最小自明事件"""
    return model.component_of(state)


def is_common_knowledge(model: PartitionFrame, event: Iterable[str], state: str) -> bool:
    """事件在 ω 处为公共知识，当且仅当 C(ω) ⊆ E"""
    return reach(model, state) <= model.event(event)


def everyone_knows(model: PartitionFrame, event: Iterable[str]) -> Event:
    """所有主体都知道事件的状态集合"""
    event = model.event(event)
    return frozenset(
        s for s in model.states
        if all(model.cell_of(a, s) <= event for a in model.agents)
    )


def common_knowledge_fixed_point(model: PartitionFrame, event: Iterable[str]) -> Event:
    """
    迭代“所有人都知道”算子直到不动点 K*(E)

    分区知识满足 K(E) ⊆ E，所以序列单调下降，最多 |Ω| 步终止。
    仅用作 is_common_knowledge 的交叉校验。
    """
    current = everyone_knows(model, event)
    while True:
        following = everyone_knows(model, current)
        if following == current:
            return current
        current = following


def is_self_evident(model: PartitionFrame, event: Iterable[str]) -> bool:
    """事件是否为每个主体分区块的并"""
    event = model.event(event)
    return all(model.cell_of(a, s) <= event for a in model.agents for s in event)


def components(model: PartitionFrame) -> List[Event]:
    """状态空间按可达集划分（按规范顺序）"""
    result: List[Event] = []
    for s in model.states:
        component = model.component_of(s)
        if component not in result:
            result.append(component)
    return result


def common_refinement(model: PartitionFrame, state: str) -> Event:
    """所有主体在 state 处信息块的交"""
    result = model.omega
    for agent in model.agents:
        result = result & model.cell_of(agent, state)
    return result


# ============================================================
# 期望与取值
# ============================================================

def conditional_expectation(prior: Prior, security: Security, event: Iterable[str]) -> Fraction:
    """E_p[X | event]"""
    event = list(event)
    if not event:
        raise PreconditionError("条件事件为空，无法计算条件期望")
    weight = prior.of(event)
    return sum((security(s) * prior[s] for s in event), Fraction(0)) / weight


def expectation(model: Model, security: Security, agent: str, state: str,
                within: Optional[Iterable[str]] = None) -> Fraction:
    """
    主体在 state 处对证券的条件期望 e_i(ω)

    within 给出额外的公开信息时，在 Π_i(ω) ∩ within 上取条件期望。
    """
    block = model.cell_of(agent, state)
    if within is not None:
        block = block & model.event(within)
    return conditional_expectation(model.priors[agent], security, model.ordered(block))


def values_on(security: Security, event: Iterable[str]) -> Tuple[FrozenSet[Fraction], Fraction, Fraction]:
    """证券在事件上的像 X(E)，及其最小值、最大值"""
    values = frozenset(security(s) for s in event)
    if not values:
        raise ModelInputError("事件为空，无法取证券的值域")
    return values, min(values), max(values)
