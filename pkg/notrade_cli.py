#!/usr/bin/env python3
"""
无交易定理检验命令行
读取模型文件（或内置示例 e1 / e2），运行可验证性判定、交易检测、先验合成、宣布过程、市场评分规则、
多证券检验以及穷举检验，输出结构化报告

退出码：0 通过，1 发现违反或反例，2 输入或用法错误
"""

import argparse
import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

from epistemic_core import NoTradeError, ModelInputError, Security, build_model, format_rational, to_rational
from verifiability import (
    classify, is_verifiable, is_maxmin_verifiable, is_threshold_verifiable, is_collectively_verifiable,
)
from agreement import (
    SynthesisFailure, detect_ck_trade, ck_trade_possible, search_ck_trade,
    synthesize_disagreement_priors, verify_theorem_on,
)
from announcement_dynamics import STATUS_PASS, STATUS_VIOLATION, check_corollary1, maxmin_path
from scoring_market import (
    LOG_TOLERANCE, QuadraticRule, make_rule, check_corollary2, telescoping_gap,
    market_maker_loss, price_table, properness_probe,
)
from multi_security import (
    is_tradable, detect_ck_trade_multi, is_threshold_verifiable_multi, feasible_profits,
    verify_proposition_on, split_security, STATUS_NOT_APPLICABLE,
)
from model_io import (
    ModelDocument, ModelParseError, Report, document_from_model, emit_report, export_table,
    inputs_digest, load_fixture, save_report, serialize_model,
)
import enumeration

logger = logging.getLogger(__name__)

DEFAULT_CONFIG = {
    "default_output_dir": "output",
    "default_format": "json",
    "seed": 0,
    "oracle_samples": 1000,
    "random_instances": 500,
    "max_states": 6,
    "max_agents": 3,
    "probe_step": "1/1000",
    "log_level": "INFO",
    "export_formats": {"json": True, "csv": True, "xlsx": False},
}

EXIT_PASS = 0
EXIT_VIOLATION = 1
EXIT_ERROR = 2


def load_config(config_file: str = "notrade_config.json") -> dict:
    """加载配置文件，与默认配置合并；文件缺失或格式错误时使用默认配置"""
    config = json.loads(json.dumps(DEFAULT_CONFIG))
    try:
        with open(config_file, 'r', encoding='utf-8') as f:
            loaded = json.load(f)
    except FileNotFoundError:
        logger.info(f"配置文件 {config_file} 不存在，使用默认配置")
        return config
    except json.JSONDecodeError as e:
        logger.error(f"配置文件格式错误: {e}，使用默认配置")
        return config
    if not isinstance(loaded, dict):
        logger.error(f"配置文件 {config_file} 顶层必须是对象，使用默认配置")
        return config
    for key, value in loaded.items():
        if isinstance(value, dict) and isinstance(config.get(key), dict):
            config[key].update(value)
        else:
            config[key] = value
    return config


# ============================================================
# 公共辅助
# ============================================================

def _document(args) -> ModelDocument:
    if not args.model:
        raise ModelInputError("需要用 --model 指定模型（e1、e2 或文件路径）")
    return load_fixture(args.model)


def _states(args, frame) -> List[str]:
    if args.state:
        frame.check_state(args.state)
        return [args.state]
    return list(frame.states)


def _order(args, doc: ModelDocument) -> Optional[List[str]]:
    if not args.order:
        return None
    if args.order in doc.schedules:
        return doc.schedule(args.order)
    return [a.strip() for a in args.order.split(",") if a.strip()]


def _report(command: str, args, doc: Optional[ModelDocument], records: List[Dict],
            violations: int = 0, summary: Optional[Dict] = None) -> Report:
    parameters = {k: v for k, v in sorted(vars(args).items()) if k not in ("handler", "verbose", "quiet")}
    digest = inputs_digest(command, serialize_model(doc) if doc else "", json.dumps(parameters, sort_keys=True))
    status = STATUS_VIOLATION if violations else STATUS_PASS
    exit_status = EXIT_VIOLATION if violations else EXIT_PASS
    return Report(command, digest, status, exit_status, records, summary or {})


def _count(statuses: Sequence[str]) -> int:
    return sum(1 for s in statuses if s == STATUS_VIOLATION)


# ============================================================
# 子命令
# ============================================================

def cmd_check(args, config) -> Report:
    """四种可验证性在指定状态上的判定"""
    doc = _document(args)
    frame, security = doc.frame(), doc.security(args.security)
    verifiable = is_verifiable(frame, security)
    collective = is_collectively_verifiable(frame, security)
    records = []
    for state in _states(args, frame):
        records.append({
            "state": state,
            "verifiable": verifiable.to_record(),
            "maxmin_verifiable": is_maxmin_verifiable(frame, security, state).to_record(),
            "threshold_verifiable": is_threshold_verifiable(frame, security, state).to_record(),
            "collectively_verifiable": collective.to_record(),
        })
    return _report("check", args, doc, records, summary={"security": security.name})


def cmd_classify(args, config) -> Report:
    doc = _document(args)
    security = doc.security(args.security)
    profile = classify(doc.frame(), security)
    return _report("classify", args, doc, [profile.to_record()], summary={"security": security.name})


def cmd_trade(args, config) -> Report:
    """当前先验下的公共知识交易检测"""
    doc = _document(args)
    model, security = doc.model(), doc.security(args.security)
    records = []
    for state in _states(args, model):
        report = detect_ck_trade(model, security, state)
        record = {"state": state, "ck_trade": report is not None}
        if report is not None:
            record.update(report.to_record())
        records.append(record)
    return _report("trade", args, doc, records)


def cmd_oracle(args, config) -> Report:
    """精确判定与随机先验搜索对照：搜索命中而判定为假即为违反"""
    doc = _document(args)
    frame, security = doc.frame(), doc.security(args.security)
    seed = config["seed"] if args.seed is None else args.seed
    samples = max(int(args.samples or config["oracle_samples"]), 1)
    records = []
    statuses = []
    for state in _states(args, frame):
        exact = ck_trade_possible(frame, security, state)
        search = search_ck_trade(frame, security, state, samples=samples, seed=seed)
        status = STATUS_VIOLATION if search.hits and not exact.possible else STATUS_PASS
        statuses.append(status)
        records.append({"state": state, "status": status, "exact": exact.to_record(), "search": search.to_record()})
    return _report("oracle", args, doc, records, _count(statuses), {"samples": samples, "seed": seed})


def cmd_synthesize(args, config) -> Report:
    """合成使指定状态出现公共知识交易的先验"""
    doc = _document(args)
    frame, security = doc.frame(), doc.security(args.security)
    state = args.state or frame.states[0]
    frame.check_state(state)
    try:
        synthesized = synthesize_disagreement_priors(frame, security, state)
    except SynthesisFailure as e:
        report = _report("synthesize", args, doc, [{"state": state, "feasibility": e.feasibility.to_record()}])
        report.status, report.exit_status = "infeasible", EXIT_ERROR
        logger.error(str(e))
        return report
    model = build_model(frame, synthesized.priors)
    confirmed = detect_ck_trade(model, security, state)
    record = {"state": state, "synthesized": synthesized.to_record(),
              "confirmed": confirmed is not None and confirmed.expectations == synthesized.targets}
    if args.save_model:
        path = Path(args.save_model)
        path.parent.mkdir(parents=True, exist_ok=True)
        comment = f"在 {state} 处合成的分歧先验"
        path.write_text(serialize_model(document_from_model(model, [security], comment)), encoding="utf-8")
        logger.info(f"合成模型已保存到: {path}")
        record["saved_model"] = str(path)
    return _report("synthesize", args, doc, [record], 0 if record["confirmed"] else 1)


def cmd_dynamics(args, config) -> Report:
    """顺序宣布过程的完整记录以及终端推论检验"""
    doc = _document(args)
    model, security = doc.model(), doc.security(args.security)
    order = _order(args, doc)
    records = []
    statuses = []
    for state in _states(args, model):
        verdict = check_corollary1(model, security, state, order)
        statuses.append(verdict.status)
        record = verdict.to_record()
        record["maxmin_path"] = maxmin_path(model, security, verdict.transcript)
        records.append(record)
    return _report("dynamics", args, doc, records, _count(statuses))


def cmd_market(args, config) -> Report:
    """市场评分规则交易：价格路径、收益、伸缩恒等式与信息聚合推论"""
    doc = _document(args)
    model, security = doc.model(), doc.security(args.security)
    rule = make_rule(args.rule, security, args.a, args.b)
    order = _order(args, doc)
    y0 = None if args.y0 is None else to_rational(args.y0)
    records = []
    statuses = []
    for state in _states(args, model):
        verdict = check_corollary2(model, security, state, rule, order, y0=y0)
        run, verdict_status = verdict.run, verdict.status
        gap = telescoping_gap(run)
        exact = gap == 0 if rule.kind == QuadraticRule.kind else abs(gap) <= LOG_TOLERANCE
        status = STATUS_VIOLATION if (not exact or verdict_status == STATUS_VIOLATION) else STATUS_PASS
        statuses.append(status)
        loss = market_maker_loss(run)
        records.append({
            "state": state,
            "status": status,
            "corollary": verdict_status,
            "telescoping_exact": exact,
            "market_maker_loss": format_rational(loss) if isinstance(loss, Fraction) else repr(float(loss)),
            "run": run.to_record(),
        })
        if args.export:
            formats = dict(config["export_formats"])
            formats["xlsx"] = formats.get("xlsx") or args.export == "xlsx"
            export_table(price_table(run), f"prices_{state}_{rule.kind}", args.output_dir or config["default_output_dir"], formats)
    return _report("market", args, doc, records, _count(statuses), {"rule": rule.kind})


def cmd_multi(args, config) -> Report:
    """证券组：可交易性、多证券交易检测、组阈值可验证与可行利润"""
    doc = _document(args)
    frame = doc.frame()
    if args.split:
        model = doc.model()
        security = doc.security(args.security)
        state = args.state or frame.states[0]
        report = detect_ck_trade(model, security, state)
        if report is None:
            raise ModelInputError(f"{state} 处没有公共知识交易，无法按交易期望拆分证券")
        bundle, price = split_security(security, report.expectations)
        summary = {"split_price": format_rational(price), "bundle": bundle.to_record()}
    else:
        bundle = doc.bundle(args.bundle)
        summary = {"bundle": bundle.to_record()}
    tradable = is_tradable(bundle, frame)
    records = []
    for state in _states(args, frame):
        record = {
            "state": state,
            "tradable": tradable.to_record(),
            "threshold_verifiable": is_threshold_verifiable_multi(frame, bundle, state).to_record(),
            "feasible_profits": {a: s.describe() for a, s in feasible_profits(frame, bundle, state).items()},
        }
        if tradable.holds and doc.priors:
            report = detect_ck_trade_multi(doc.model(), bundle, state)
            record["ck_trade"] = report is not None
            if report is not None:
                record["profits"] = report.to_record()["expectations"]
        records.append(record)
    return _report("multi", args, doc, records, summary=summary)


def cmd_theorem(args, config) -> Report:
    """等价定理：给定模型时逐状态检验，否则在小状态空间上穷举"""
    if args.model:
        doc = _document(args)
        frame, security = doc.frame(), doc.security(args.security)
        verdicts = [verify_theorem_on(frame, security, s) for s in _states(args, frame)]
        records = [v.to_record() for v in verdicts]
        return _report("theorem", args, doc, records, sum(1 for v in verdicts if not v.holds))
    if args.agents != 2:
        raise ModelInputError("穷举检验只支持两个主体")
    sizes = range(2, args.states + 1)
    summary = enumeration.check_theorem_enumeration(sizes)
    return _report("theorem", args, None, [summary.to_record()], summary.violations)


def cmd_proposition(args, config) -> Report:
    """多证券命题：给定模型与证券组时逐状态检验，否则穷举拆分得到的证券组"""
    if args.model:
        doc = _document(args)
        frame, bundle = doc.frame(), doc.bundle(args.bundle)
        verdicts = [verify_proposition_on(frame, bundle, s) for s in _states(args, frame)]
        records = [v.to_record() for v in verdicts]
        not_applicable = sum(1 for v in verdicts if v.status == STATUS_NOT_APPLICABLE)
        return _report("proposition", args, doc, records, _count([v.status for v in verdicts]),
                       {"not_applicable": not_applicable})
    e1 = load_fixture("e1")
    summary = enumeration.check_proposition_enumeration(range(2, args.states + 1),
                                                        extra=[(e1.frame(), e1.bundle())])
    return _report("proposition", args, None, [summary.to_record()], summary.violations)


def cmd_probe(args, config) -> Report:
    """评分规则严格适当性的网格探测"""
    step = to_rational(args.step or config["probe_step"])
    seed = config["seed"] if args.seed is None else args.seed
    if args.values:
        values = [to_rational(v) for v in args.values.split(",")]
        if args.probs:
            probs = [to_rational(p) for p in args.probs.split(",")]
        else:
            probs = [Fraction(1, len(values))] * len(values)
        if len(probs) != len(values):
            raise ModelInputError("--values 与 --probs 的个数不一致")
        distribution = dict(zip(values, probs))
        security = Security({f"v{i}": v for i, v in enumerate(values)})
        result = properness_probe(make_rule(args.rule, security, args.a, args.b), distribution, step)
        return _report("probe", args, None, [result.to_record()], 0 if result.within else 1)
    summary = enumeration.check_properness(args.count, seed, step)
    return _report("probe", args, None, [summary.to_record()], summary.violations)


def cmd_harness(args, config) -> Report:
    """全部穷举与随机检验"""
    seed = config["seed"] if args.seed is None else args.seed
    instances = args.instances or config["random_instances"]
    summaries = enumeration.run_all(
        sizes=range(2, args.states + 1), instances=instances, seed=seed,
        max_states=config["max_states"], max_agents=config["max_agents"],
        step=to_rational(config["probe_step"]),
    )
    violations = sum(s.violations for s in summaries)
    return _report("harness", args, None, [s.to_record() for s in summaries], violations,
                   {"seed": seed, "instances": instances})


# ============================================================
# 参数解析
# ============================================================

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="模型：e1、e2 或模型文件路径")
    common.add_argument("--security", help="证券名称（默认取文件中的第一个）")
    common.add_argument("--state", help="状态（默认检验所有状态）")
    common.add_argument("--format", choices=["json", "table"], help="输出格式")
    common.add_argument("--seed", type=int, help="随机种子")
    common.add_argument("--config", default="notrade_config.json", help="配置文件")
    common.add_argument("--output-dir", help="输出目录")
    common.add_argument("--save", action="store_true", help="同时把报告保存为 JSON 文件")
    common.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    common.add_argument("-q", "--quiet", action="store_true", help="只输出警告和错误")

    parser = argparse.ArgumentParser(prog="notrade_cli", description="无交易定理与可验证性检验工具")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=handler)
        return p

    add("check", cmd_check, "四种可验证性判定")
    add("classify", cmd_classify, "所有状态上的可验证性汇总")
    add("trade", cmd_trade, "当前先验下的公共知识交易检测")
    p = add("oracle", cmd_oracle, "精确判定与随机先验搜索对照")
    p.add_argument("--samples", type=int, help="随机先验个数")
    p = add("synthesize", cmd_synthesize, "合成分歧先验")
    p.add_argument("--save-model", help="把合成后的模型写入该文件")
    for name, handler, help_text in (("dynamics", cmd_dynamics, "顺序宣布过程"),
                                     ("market", cmd_market, "市场评分规则交易")):
        p = add(name, handler, help_text)
        p.add_argument("--order", help="发言日程：逗号分隔的主体，或文件中的日程名称")
        if name == "market":
            p.add_argument("--rule", choices=["quadratic", "logarithmic"], default="quadratic")
            p.add_argument("--y0", help="初始预测（默认取 Y 的中点）")
            p.add_argument("--a", help="对数规则下界")
            p.add_argument("--b", help="对数规则上界")
            p.add_argument("--export", choices=["csv", "xlsx"], help="导出价格路径表")
    p = add("multi", cmd_multi, "证券组检验")
    p.add_argument("--bundle", help="证券组名称")
    p.add_argument("--split", action="store_true", help="按检测到的单证券交易拆分证券")
    p = add("theorem", cmd_theorem, "等价定理检验")
    p.add_argument("--states", type=int, default=4, help="穷举的最大状态数")
    p.add_argument("--agents", type=int, default=2, help="主体数")
    p = add("proposition", cmd_proposition, "多证券命题检验")
    p.add_argument("--bundle", help="证券组名称")
    p.add_argument("--states", type=int, default=4, help="穷举的最大状态数")
    p = add("probe", cmd_probe, "评分规则适当性探测")
    p.add_argument("--rule", choices=["quadratic", "logarithmic"], default="quadratic")
    p.add_argument("--values", help="收益值，逗号分隔")
    p.add_argument("--probs", help="概率，逗号分隔（默认均匀）")
    p.add_argument("--step", help="网格步长（默认读配置）")
    p.add_argument("--count", type=int, default=100, help="随机分布个数")
    p.add_argument("--a", help="对数规则下界")
    p.add_argument("--b", help="对数规则上界")
    p = add("harness", cmd_harness, "全部穷举与随机检验")
    p.add_argument("--states", type=int, default=4, help="穷举的最大状态数")
    p.add_argument("--instances", type=int, help="随机实例个数")
    return parser


def cli_dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """解析参数并运行子命令，返回退出码"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_ERROR if e.code else EXIT_PASS

    config = load_config(args.config)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else config.get("log_level", "INFO")
    logging.getLogger().setLevel(level)

    try:
        report = args.handler(args, config)
    except ModelParseError as e:
        for d in e.diagnostics:
            logger.error(f"{args.model}:{d}")
        return EXIT_ERROR
    except NoTradeError as e:
        logger.error(str(e))
        return EXIT_ERROR

    fmt = args.format or config["default_format"]
    sys.stdout.write(emit_report(report, fmt))
    if args.save:
        save_report(report, args.output_dir or config["default_output_dir"])
    return report.exit_status


def main():
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    return cli_dispatch()


if __name__ == "__main__":
    sys.exit(main())
