#!/usr/bin/env python3
"""
模型文件读写与报告输出模块
JSON 模型文件的解析（带行列定位的诊断）与规范序列化、内置示例模型、结构化报告与表格导出

模型文件字段：schema, comment, states, agents, partitions, priors, securities, bundles, schedules。
所有有理数都以字符串 "a/b" 保存，避免浮点往返误差。
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import pandas as pd

from epistemic_core import (
    Model, ModelInputError, Partition, PartitionFrame, Prior, Security,
    to_rational, format_rational,
)
from multi_security import SecurityBundle

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FIXTURE_DIR = Path(__file__).resolve().parent / "json-config" / "models"
FIELD_ORDER = ["schema", "comment", "states", "agents", "partitions", "priors",
               "securities", "bundles", "schedules"]


# ============================================================
# 诊断
# ============================================================

@dataclass
class Diagnostic:
    """带位置的诊断信息"""
    code: str
    message: str
    line: int = 0
    column: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.column}: [{self.code}] {self.message}"


class ModelParseError(ModelInputError):
    """模型文件解析失败，携带全部诊断"""

    def __init__(self, diagnostics: List[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))

    @property
    def codes(self) -> List[str]:
        return [d.code for d in self.diagnostics]


def _position(text: str, offset: int) -> Tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    column = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, column


def locate(text: str, path: Iterable[Any]) -> Tuple[int, int]:
    """
    按键路径在原始文本中逐段查找位置（1 起始的行、列）

    依次查找每一段的 JSON 字符串形式，每段都从上一段的位置之后开始；找不到时停在最后找到的位置。
    """
    offset = 0
    for part in path:
        needle = json.dumps(str(part), ensure_ascii=False)
        found = text.find(needle, offset)
        if found < 0:
            break
        offset = found
    return _position(text, offset)


class _Collector:
    """收集诊断并负责定位"""

    def __init__(self, text: str):
        self.text = text
        self.items: List[Diagnostic] = []

    def add(self, code: str, message: str, *path) -> None:
        line, column = locate(self.text, path)
        self.items.append(Diagnostic(code, message, line, column))


# ============================================================
# 文档
# ============================================================

@dataclass
class ModelDocument:
    """解析后的模型文件"""
    schema: int
    states: List[str]
    agents: List[str]
    partitions: Dict[str, List[List[str]]]
    priors: Dict[str, Dict[str, Fraction]] = field(default_factory=dict)
    securities: Dict[str, Security] = field(default_factory=dict)
    bundles: Dict[str, SecurityBundle] = field(default_factory=dict)
    schedules: Dict[str, List[str]] = field(default_factory=dict)
    comment: str = ""

    def frame(self) -> PartitionFrame:
        return PartitionFrame(tuple(self.states), tuple(self.agents), self._partitions())

    def model(self) -> Model:
        if not self.priors:
            raise ModelInputError("模型文件没有给出先验")
        priors = {a: Prior(dict(self.priors[a])) for a in self.agents}
        return Model(tuple(self.states), tuple(self.agents), self._partitions(), priors)

    def security(self, name: Optional[str] = None) -> Security:
        if name is None:
            if not self.securities:
                raise ModelInputError("模型文件没有定义证券")
            return next(iter(self.securities.values()))
        try:
            return self.securities[name]
        except KeyError:
            raise ModelInputError(f"未知证券: {name}（可选: {', '.join(self.securities)}）")

    def bundle(self, name: Optional[str] = None) -> SecurityBundle:
        if name is None:
            if not self.bundles:
                raise ModelInputError("模型文件没有定义证券组")
            return next(iter(self.bundles.values()))
        try:
            return self.bundles[name]
        except KeyError:
            raise ModelInputError(f"未知证券组: {name}（可选: {', '.join(self.bundles)}）")

    def schedule(self, name: str) -> List[str]:
        try:
            return list(self.schedules[name])
        except KeyError:
            raise ModelInputError(f"未知日程: {name}")

    def _partitions(self) -> Dict[str, Partition]:
        return {a: Partition.from_lists(self.partitions[a]) for a in self.agents}


# ============================================================
# 解析
# ============================================================

def _rational(raw: Any, collector: _Collector, *path) -> Optional[Fraction]:
    if isinstance(raw, bool) or isinstance(raw, float) or not isinstance(raw, (int, str)):
        collector.add("bad-rational", f"{'/'.join(map(str, path))}: 有理数必须写成 \"a/b\" 字符串，得到 {raw!r}", *path)
        return None
    try:
        return to_rational(raw)
    except ModelInputError:
        collector.add("bad-rational", f"{'/'.join(map(str, path))}: 无效的有理数 {raw!r}", *path)
        return None


def _id_list(data: Dict, key: str, code: str, collector: _Collector) -> List[str]:
    raw = data.get(key)
    if not isinstance(raw, list) or not raw or not all(isinstance(x, str) for x in raw):
        collector.add("missing-field", f"字段 {key} 必须是非空的字符串列表", key)
        return []
    seen = set()
    for item in raw:
        if item in seen:
            collector.add(code, f"{key} 中标识 {item!r} 重复", key, item)
        seen.add(item)
    return list(dict.fromkeys(raw))


def _parse_partitions(data: Dict, states: List[str], agents: List[str],
                      collector: _Collector) -> Dict[str, List[List[str]]]:
    raw = data.get("partitions")
    if not isinstance(raw, dict):
        collector.add("missing-field", "字段 partitions 必须是 主体 -> 块列表 的映射", "partitions")
        return {}
    result = {}
    for agent in raw:
        if agent not in agents:
            collector.add("unknown-agent", f"partitions 引用了未知主体 {agent!r}", "partitions", agent)
    for agent in agents:
        blocks = raw.get(agent)
        if not isinstance(blocks, list):
            collector.add("missing-field", f"缺少主体 {agent} 的分区", "partitions")
            continue
        seen = set()
        for block in blocks:
            if not isinstance(block, list) or not block:
                collector.add("empty-block", f"主体 {agent} 的分区含有空块或非列表块", "partitions", agent)
                continue
            for s in block:
                if not isinstance(s, str):
                    collector.add("bad-state-id", f"主体 {agent} 的分区块含有非字符串的状态标识 {s!r}",
                                  "partitions", agent)
                    continue
                if s not in states:
                    collector.add("unknown-state", f"主体 {agent} 的分区引用了未知状态 {s!r}", "partitions", agent, s)
                elif s in seen:
                    collector.add("blocks-overlap", f"主体 {agent} 的分区块在 {s} 处重叠", "partitions", agent, s)
                seen.add(s)
        missing = [s for s in states if s not in seen]
        if missing:
            collector.add("blocks-not-covering", f"主体 {agent} 的分区未覆盖 {missing}", "partitions", agent)
        result[agent] = [list(b) for b in blocks if isinstance(b, list)]
    return result


def _parse_state_map(raw: Any, states: List[str], collector: _Collector, code_missing: str,
                     *path) -> Optional[Dict[str, Fraction]]:
    if not isinstance(raw, dict):
        collector.add("missing-field", f"{'/'.join(map(str, path))} 必须是 状态 -> 有理数 的映射", *path)
        return None
    values = {}
    for s, v in raw.items():
        if s not in states:
            collector.add("unknown-state", f"{'/'.join(map(str, path))} 引用了未知状态 {s!r}", *path, s)
            continue
        value = _rational(v, collector, *path, s)
        if value is not None:
            values[s] = value
    missing = [s for s in states if s not in raw]
    if missing:
        collector.add(code_missing, f"{'/'.join(map(str, path))} 缺少状态 {missing}", *path)
    return {s: values[s] for s in states if s in values}


def _parse_priors(data: Dict, states: List[str], agents: List[str],
                  collector: _Collector) -> Dict[str, Dict[str, Fraction]]:
    raw = data.get("priors")
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        collector.add("missing-field", "字段 priors 必须是 主体 -> 先验 的映射", "priors")
        return {}
    result = {}
    for agent in raw:
        if agent not in agents:
            collector.add("unknown-agent", f"priors 引用了未知主体 {agent!r}", "priors", agent)
    for agent in agents:
        if agent not in raw:
            collector.add("missing-field", f"缺少主体 {agent} 的先验", "priors")
            continue
        mass = _parse_state_map(raw[agent], states, collector, "missing-field", "priors", agent)
        if mass is None:
            continue
        for s, m in mass.items():
            if m == 0:
                collector.add("zero-mass", f"主体 {agent} 的先验在 {s} 处为 0（必须全支撑）", "priors", agent, s)
            elif m < 0:
                collector.add("negative-mass", f"主体 {agent} 的先验在 {s} 处为负", "priors", agent, s)
        if len(mass) == len(states):
            total = sum(mass.values(), Fraction(0))
            if total != 1:
                collector.add("prior-not-normalized",
                              f"主体 {agent} 的先验总和为 {format_rational(total)}，不等于 1", "priors", agent)
        result[agent] = mass
    return result


def _parse_securities(data: Dict, states: List[str], collector: _Collector) -> Dict[str, Security]:
    raw = data.get("securities", {})
    if not isinstance(raw, dict):
        collector.add("missing-field", "字段 securities 必须是 名称 -> 收益 的映射", "securities")
        return {}
    result = {}
    for name, payoff in raw.items():
        values = _parse_state_map(payoff, states, collector, "missing-payoff", "securities", name)
        if values is not None and len(values) == len(states):
            result[name] = Security(values, name)
    return result


def _parse_bundles(data: Dict, states: List[str], agents: List[str],
                   collector: _Collector) -> Dict[str, SecurityBundle]:
    raw = data.get("bundles", {})
    if not isinstance(raw, dict):
        collector.add("missing-field", "字段 bundles 必须是 名称 -> 主体 -> 收益 的映射", "bundles")
        return {}
    result = {}
    for name, members in raw.items():
        if not isinstance(members, dict):
            collector.add("missing-field", f"证券组 {name} 必须是 主体 -> 收益 的映射", "bundles", name)
            continue
        securities = {}
        for agent, payoff in members.items():
            if agent not in agents:
                collector.add("unknown-agent", f"证券组 {name} 引用了未知主体 {agent!r}", "bundles", name, agent)
                continue
            values = _parse_state_map(payoff, states, collector, "missing-payoff", "bundles", name, agent)
            if values is not None and len(values) == len(states):
                securities[agent] = Security(values, f"{name}_{agent}")
        missing = [a for a in agents if a not in members]
        if missing:
            collector.add("missing-field", f"证券组 {name} 缺少主体 {missing}", "bundles", name)
        elif len(securities) == len(agents):
            result[name] = SecurityBundle({a: securities[a] for a in agents})
    return result


def _parse_schedules(data: Dict, agents: List[str], collector: _Collector) -> Dict[str, List[str]]:
    raw = data.get("schedules", {})
    if not isinstance(raw, dict):
        collector.add("bad-schedule", "字段 schedules 必须是 名称 -> 主体列表 的映射", "schedules")
        return {}
    result = {}
    for name, order in raw.items():
        if not isinstance(order, list) or not order:
            collector.add("bad-schedule", f"日程 {name} 必须是非空的主体列表", "schedules", name)
            continue
        unknown = [a for a in order if a not in agents]
        missing = [a for a in agents if a not in order]
        if unknown or missing:
            collector.add("bad-schedule", f"日程 {name}: 未知主体 {unknown}，缺少主体 {missing}", "schedules", name)
            continue
        result[name] = list(order)
    return result


def parse_model(text: str) -> ModelDocument:
    """
    解析模型文件文本

    Returns:
        ModelDocument: 通过全部校验的文档

    Raises:
        ModelParseError: 带全部诊断（每种违反对应一个不同的诊断代码）
    """
    collector = _Collector(text)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelParseError([Diagnostic("json-syntax", e.msg, e.lineno, e.colno)])
    if not isinstance(data, dict):
        raise ModelParseError([Diagnostic("missing-field", "模型文件顶层必须是对象", 1, 1)])

    schema = data.get("schema")
    if schema is None:
        collector.add("missing-field", "缺少字段 schema")
    elif schema != SCHEMA_VERSION:
        collector.add("schema-version", f"不支持的 schema 版本 {schema!r}（支持 {SCHEMA_VERSION}）", "schema")

    states = _id_list(data, "states", "duplicate-state", collector)
    agents = _id_list(data, "agents", "duplicate-agent", collector)
    partitions = _parse_partitions(data, states, agents, collector) if states and agents else {}
    priors = _parse_priors(data, states, agents, collector) if states and agents else {}
    securities = _parse_securities(data, states, collector) if states else {}
    bundles = _parse_bundles(data, states, agents, collector) if states and agents else {}
    schedules = _parse_schedules(data, agents, collector) if agents else {}

    if collector.items:
        for d in collector.items:
            logger.debug(f"模型诊断 {d}")
        raise ModelParseError(collector.items)

    return ModelDocument(
        schema=schema, states=states, agents=agents, partitions=partitions, priors=priors,
        securities=securities, bundles=bundles, schedules=schedules,
        comment=str(data.get("comment", "")),
    )


def serialize_model(doc: ModelDocument) -> str:
    """规范序列化：固定字段顺序、两空格缩进、有理数写成 "a/b" """
    data: Dict[str, Any] = {"schema": doc.schema}
    if doc.comment:
        data["comment"] = doc.comment
    data["states"] = list(doc.states)
    data["agents"] = list(doc.agents)
    data["partitions"] = {a: [list(b) for b in doc.partitions[a]] for a in doc.agents}
    if doc.priors:
        data["priors"] = {a: {s: format_rational(doc.priors[a][s]) for s in doc.states} for a in doc.agents}
    if doc.securities:
        data["securities"] = {
            name: {s: format_rational(x.payoff[s]) for s in doc.states}
            for name, x in doc.securities.items()
        }
    if doc.bundles:
        data["bundles"] = {
            name: {a: {s: format_rational(b.securities[a].payoff[s]) for s in doc.states} for a in doc.agents}
            for name, b in doc.bundles.items()
        }
    if doc.schedules:
        data["schedules"] = {name: list(order) for name, order in doc.schedules.items()}
    return json.dumps(data, ensure_ascii=False, indent=2) + "\n"


def document_from_model(model: Model, securities: Iterable[Security] = (),
                        comment: str = "") -> ModelDocument:
    """从内存中的模型构造文档（用于保存合成结果）"""
    return ModelDocument(
        schema=SCHEMA_VERSION,
        states=list(model.states),
        agents=list(model.agents),
        partitions={a: [model.ordered(b) for b in model.cells_within(a, model.omega)] for a in model.agents},
        priors={a: dict(model.priors[a].mass) for a in model.agents},
        securities={x.name: x for x in securities},
        comment=comment,
    )


def load_model_file(path) -> ModelDocument:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ModelInputError(f"无法读取模型文件 {path}: {e}")
    return parse_model(text)


def load_fixture(name: str) -> ModelDocument:
    """按名称加载内置模型（e1、e2），或按路径加载模型文件"""
    candidate = FIXTURE_DIR / f"{name.lower()}.json"
    if candidate.exists():
        return load_model_file(candidate)
    return load_model_file(name)


# ============================================================
# 报告
# ============================================================

@dataclass
class Report:
    """结构化报告"""
    command: str
    inputs_digest: str
    status: str
    exit_status: int
    records: List[Dict[str, Any]] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    def to_record(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "inputs_digest": self.inputs_digest,
            "status": self.status,
            "exit_status": self.exit_status,
            "summary": self.summary,
            "records": self.records,
        }


def inputs_digest(*parts: Any) -> str:
    """输入摘要：各部分规范 JSON 的 SHA-256"""
    payload = json.dumps([str(p) for p in parts], ensure_ascii=False)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def _flatten(record: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, list):
            flat[name] = json.dumps(value, ensure_ascii=False)
        else:
            flat[name] = value
    return flat


def report_frame(report: Report) -> pd.DataFrame:
    """报告记录的表格视图（嵌套字段展开为 a.b 列）"""
    rows = [_flatten(r) for r in report.records]
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    return pd.DataFrame(rows, columns=columns)


def emit_report(report: Report, fmt: str = "json") -> str:
    """输出报告：json 为固定字段顺序的结构化文本，table 为对齐的表格"""
    if fmt == "json":
        return json.dumps(report.to_record(), ensure_ascii=False, indent=2) + "\n"
    if fmt != "table":
        raise ModelInputError(f"未知的输出格式: {fmt}（可选 json / table）")
    lines = [f"命令: {report.command}    状态: {report.status}    退出码: {report.exit_status}"]
    for key, value in report.summary.items():
        lines.append(f"  {key}: {value}")
    frame = report_frame(report)
    if frame.empty:
        lines.append("（无记录）")
    else:
        lines.append(frame.to_string(index=False))
    return "\n".join(lines) + "\n"


def save_report(report: Report, output_dir: str = "output") -> Optional[str]:
    """把报告保存为 JSON 文件，失败返回 None"""
    try:
        output_path = Path(output_dir)
        output_path.mkdir(parents=True, exist_ok=True)
        filename = output_path / f"report_{report.command}_{report.inputs_digest[:12]}.json"
        filename.write_text(emit_report(report, "json"), encoding="utf-8")
        logger.info(f"报告已保存到: {filename}")
        return str(filename)
    except OSError as e:
        logger.error(f"保存报告失败: {e}")
        return None


def export_table(frame: pd.DataFrame, stem: str, output_dir: str = "output",
                 formats: Optional[Dict[str, bool]] = None) -> List[str]:
    """
    导出表格

    Args:
        frame: 表格数据
        stem: 文件名（不含扩展名）
        output_dir: 输出目录
        formats: {"csv": bool, "xlsx": bool}，默认只导出 CSV

    Returns:
        List[str]: 已写出的文件路径
    """
    formats = formats or {"csv": True}
    output_path = Path(output_dir)
    output_path.mkdir(parents=True, exist_ok=True)
    written = []
    if formats.get("csv"):
        filename = output_path / f"{stem}.csv"
        frame.to_csv(filename, index=False, encoding="utf-8-sig")
        written.append(str(filename))
    if formats.get("xlsx"):
        filename = output_path / f"{stem}.xlsx"
        try:
            frame.to_excel(filename, index=False, engine="openpyxl")
            written.append(str(filename))
        except ImportError as e:
            logger.warning(f"未安装 openpyxl，跳过 Excel 导出: {e}")
    for f in written:
        logger.info(f"表格已导出到: {f}")
    return written
