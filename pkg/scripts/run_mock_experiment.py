#!/usr/bin/env python3
"""End-to-end offline experiment on the synthetic phantom.

Generates the default phantom, renders all frames, extracts the demonstration
crop at the disc center, classifies every frame with the mock backend in both
shot formats, and prints the comparison report.

Usage: python scripts/run_mock_experiment.py [workdir]
"""
import subprocess
import sys
from pathlib import Path


def run(*args):
    print("+", " ".join(str(a) for a in args))
    subprocess.run([sys.executable, "-m", "thzicl.cli", *map(str, args)], check=True)


def main():
    work = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("mock_experiment")
    work.mkdir(parents=True, exist_ok=True)
    vol = work / "phantom.thzv"
    ann = work / "annotations.csv"
    crop = work / "demo_crop.png"
    zero = work / "zero.jsonl"
    one = work / "one.jsonl"

    run("phantom", "--out-volume", vol, "--out-annotations", ann)
    run("render", vol, work / "frames")
    # disc center of the default phantom (cell x=44, y=32) sits at map
    # column 64-1-44 = 19, row 32 after the orientation flip; peak frame 32
    run("crop", vol, 32, 19, 32, "--out", crop)
    run("classify", vol, "--shot", "zero", "--backend", "mock", "--out", zero)
    run("classify", vol, "--shot", "one", "--backend", "mock", "--crop", crop, "--out", one)
    run("evaluate", "--annotations", ann, "--compare", zero, one)


if __name__ == "__main__":
    main()
