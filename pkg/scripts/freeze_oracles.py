"""Regenerate every reference fixture under tests/fixtures."""

from pathlib import Path

from maxent.oracles import ORACLES, oracle_freeze

FIXTURES = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

if __name__ == "__main__":
    for name in sorted(ORACLES):
        print(oracle_freeze(name, FIXTURES))
