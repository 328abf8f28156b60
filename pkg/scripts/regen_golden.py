"""Rewrite the golden CLI reports under tests/golden.

Run after an intentional change to report content, then review the diff.
"""

from pathlib import Path

from click.testing import CliRunner

from statfrob.cli import cli

ROOT = Path(__file__).resolve().parents[1]

# (golden file, argv); spec paths are relative to the repo root
CASES = [
    ("bernoulli_check.json", ["check", "specs/bernoulli.json"]),
    ("categorical_check.json", ["check", "specs/categorical3.json"]),
    ("bernoulli_learn.json", ["learn", "specs/bernoulli.json"]),
    ("categorical_learn.json", ["learn", "specs/categorical3.json"]),
    ("categorical_tensors.json", ["tensors", "specs/categorical3.json", "--alpha", "0"]),
    ("bernoulli_gws4.json", ["gws", "specs/bernoulli.json", "--order", "4"]),
]


def main():
    runner = CliRunner()
    out_dir = ROOT / "tests" / "golden"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, argv in CASES:
        result = runner.invoke(cli, [argv[0], str(ROOT / argv[1]), *argv[2:]])
        (out_dir / name).write_text(result.output, encoding="utf-8")
        print(f"{name}: exit {result.exit_code}")


if __name__ == "__main__":
    main()
