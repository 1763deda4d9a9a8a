#!/usr/bin/env python3
"""
Single command to run the whole layout-analysis demo: synthetic corpus,
post-processing and evaluation
"""

import argparse
import os
import subprocess
import sys
import tempfile
from pathlib import Path


class DemoRunner:
    def __init__(self, work_dir: Path, pages: int, seed: int, jobs: int):
        self.work_dir = work_dir
        self.pages = pages
        self.seed = seed
        self.jobs = jobs
        self.base_dir = Path(__file__).parent

    def dla(self, *args: str) -> subprocess.CompletedProcess:
        env = os.environ.copy()
        env["PYTHONPATH"] = str(self.base_dir)
        command = [sys.executable, "-m", "dla_toolkit", "--jobs", str(self.jobs), *args]
        return subprocess.run(command, cwd=self.base_dir, env=env, check=True,
                              capture_output=True, text=True)

    def generate(self):
        """Write ground-truth pages and perturbed detections"""
        print("🧩 Generating synthetic corpus...")
        self.dla("synth", "--out", str(self.work_dir / "synth"), "--seed", str(self.seed),
                 "--pages", str(self.pages), "--jitter", "2", "--fp", "1", "--fn", "1")
        print(f"✅ {self.pages} page(s) written to {self.work_dir / 'synth'}")

    def post_process(self):
        print("🔧 Post-processing detections...")
        result = self.dla("post-process", str(self.work_dir / "synth" / "detections.tsv"),
                          str(self.work_dir / "hyp"))
        print(f"✅ {result.stdout.strip()}")

    def evaluate(self) -> str:
        print("📏 Evaluating hypotheses against ground truth...")
        result = self.dla("eval", str(self.work_dir / "synth" / "gt"), str(self.work_dir / "hyp"))
        return result.stdout

    def run(self) -> int:
        try:
            print("🚀 Document layout analysis demo")
            print("=" * 60)
            self.generate()
            self.post_process()
            report = self.evaluate()
            print("\n📊 Evaluation report")
            print("=" * 60)
            print(report, end="")
            print("=" * 60)
        except subprocess.CalledProcessError as e:
            print(f"❌ Step failed with exit code {e.returncode}")
            print(e.stderr)
            return 1
        return 0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pages", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--jobs", type=int, default=4)
    parser.add_argument("--keep", type=Path, help="keep outputs in this directory")
    args = parser.parse_args()

    if sys.version_info < (3, 10):
        print("❌ Python 3.10+ is required")
        return 1

    if args.keep:
        args.keep.mkdir(parents=True, exist_ok=True)
        return DemoRunner(args.keep, args.pages, args.seed, args.jobs).run()
    with tempfile.TemporaryDirectory(prefix="dla_demo_") as work_dir:
        return DemoRunner(Path(work_dir), args.pages, args.seed, args.jobs).run()


if __name__ == "__main__":
    sys.exit(main())
