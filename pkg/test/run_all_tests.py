#!/usr/bin/env python3
"""
运行所有测试脚本
"""

import subprocess
import sys
import os

TEST_SCRIPTS = [
    "test_epistemic_core.py",
    "test_verifiability.py",
    "test_agreement.py",
    "test_announcement_dynamics.py",
    "test_scoring_market.py",
    "test_multi_security.py",
    "test_model_io.py",
    "test_enumeration.py",
    "test_notrade_cli.py",
]


def run_test_script(script_name):
    """运行指定的测试脚本，返回是否成功"""
    print(f"\n{'='*50}")
    print(f"运行测试脚本: {script_name}")
    print(f"{'='*50}")

    try:
        result = subprocess.run([sys.executable, script_name],
                                cwd=os.path.dirname(os.path.abspath(__file__)),
                                capture_output=True,
                                text=True,
                                timeout=600)

        print(result.stdout)
        if result.stderr:
            print("STDERR:", result.stderr)

        if result.returncode == 0:
            print(f"✓ {script_name} 运行成功")
            return True
        print(f"✗ {script_name} 运行失败 (返回码: {result.returncode})")

    except subprocess.TimeoutExpired:
        print(f"✗ {script_name} 运行超时")
    except Exception as e:
        print(f"✗ 运行 {script_name} 时出错: {e}")
    return False


def main():
    """主函数"""
    print("开始运行所有测试脚本...")

    failed = []
    for script in TEST_SCRIPTS:
        script_path = os.path.join(os.path.dirname(os.path.abspath(__file__)), script)
        if not os.path.exists(script_path):
            print(f"警告: 测试脚本 {script} 不存在")
            continue
        if not run_test_script(script):
            failed.append(script)

    print(f"\n{'='*50}")
    if failed:
        print(f"失败的测试脚本: {', '.join(failed)}")
    else:
        print("所有测试脚本运行完成")
    print(f"{'='*50}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
