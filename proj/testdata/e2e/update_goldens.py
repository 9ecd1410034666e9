#!/usr/bin/env python3
"""Rewrites golden/<case>.report.{json,md} by running the CLI on every case in
cases.json. Review the resulting diff before committing."""
import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent


def main():
    if len(sys.argv) != 2:
        sys.exit("usage: update_goldens.py path/to/fetalagents")
    binary = Path(sys.argv[1]).resolve()
    spec = json.loads((ROOT / "cases.json").read_text())
    golden = ROOT / "golden"
    golden.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        for case in spec["cases"]:
            out = Path(tmp) / case["name"]
            cmd = [str(binary), "--clock", spec["clock"], *case["args"], "--config", spec["config"],
                   "--out", str(out), "--runs-dir", str(Path(tmp) / "runs")]
            subprocess.run(cmd, cwd=ROOT, check=True)
            for ext in ("json", "md"):
                shutil.copyfile(out / f"report.{ext}", golden / f"{case['name']}.report.{ext}")


if __name__ == "__main__":
    main()
