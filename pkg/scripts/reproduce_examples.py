"""Run every CLI command on the bundled scenarios and print the reports.

Usage: python3 scripts/reproduce_examples.py [--format machine]
"""
import argparse
from pathlib import Path

from dltts.cli import execute

SCN = Path(__file__).resolve().parent.parent / "scenarios"

COMMANDS = [
    ["distance", "hospital.scn", "--target", "T"],
    ["run", "hospital.scn", "--target", "T"],
    ["compare", "hospital.scn", "--target", "T"],
    ["run", "bank.scn"],
    ["audit", "example4.scn", "--adjacency", "rho", "--adjacency", "hamming"],
    ["audit", "rr.scn"],
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--format", choices=("text", "machine"), default="text")
    args = ap.parse_args()
    for cmd, name, *flags in COMMANDS:
        code, text = execute([cmd, str(SCN / name), *flags, "--format", args.format])
        print(f"$ dltts {cmd} {name} {' '.join(flags)}".rstrip() + f"   (exit {code})")
        print(text)


if __name__ == "__main__":
    main()
