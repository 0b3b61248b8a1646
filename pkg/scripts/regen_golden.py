"""Rewrite the CLI golden files under tests/golden/ from the bundled scenarios."""
from pathlib import Path

from dltts.cli import execute

ROOT = Path(__file__).resolve().parent.parent
SCN = ROOT / "scenarios"

CASES = {
    "hospital_distance": ["distance", str(SCN / "hospital.scn"), "--target", "T"],
    "hospital_run": ["run", str(SCN / "hospital.scn"), "--target", "T"],
    "hospital_compare": ["compare", str(SCN / "hospital.scn"), "--target", "T"],
    "bank_run": ["run", str(SCN / "bank.scn")],
    "example4_audit": ["audit", str(SCN / "example4.scn"), "--adjacency", "rho", "--adjacency", "hamming"],
    "rr_audit": ["audit", str(SCN / "rr.scn")],
}


def main():
    out = ROOT / "tests" / "golden"
    out.mkdir(exist_ok=True)
    for name, argv in CASES.items():
        for fmt, ext in (("text", "txt"), ("machine", "json")):
            _, text = execute(argv + ["--format", fmt])
            (out / f"{name}.{ext}").write_text(text, encoding="utf-8")
            print(f"wrote {name}.{ext}")


if __name__ == "__main__":
    main()
