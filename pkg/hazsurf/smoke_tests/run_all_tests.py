# hazsurf/smoke_tests/run_all_tests.py
"""
Run the smoke tests in order.

    python -m hazsurf.smoke_tests            # all tests
    python -m hazsurf.smoke_tests quick      # fast numerical core only
    python -m hazsurf.smoke_tests 4 7        # selected test numbers
"""

import importlib
import sys
import time
from typing import Dict, List, Sequence

MODULES: Dict[int, str] = {
    1: "test_1_basis",
    2: "test_2_binning",
    3: "test_3_configuration_system",
    4: "test_4_estimator",
    5: "test_5_selection",
    6: "test_6_one_time_scale",
    7: "test_7_surface",
    8: "test_8_competing",
    9: "test_9_cli",
    10: "test_10_prefect_integration",
    11: "test_11_rotterdam",
}

QUICK = [1, 2, 3, 4, 7]


class SmokeTestRunner:
    """Imports each numbered test module and calls its main()"""

    def __init__(self, numbers: Sequence[int]):
        unknown = [n for n in numbers if n not in MODULES]
        if unknown:
            raise ValueError(f"unknown test number(s): {unknown}")
        self.numbers = list(numbers)
        self.results: Dict[int, bool] = {}

    def run(self) -> bool:
        for n in self.numbers:
            module = importlib.import_module(f"{__package__}.{MODULES[n]}")
            start = time.time()
            self.results[n] = bool(module.main())
            print(f"⏱️  {MODULES[n]} took {time.time() - start:.1f}s\n")
        self.report()
        return all(self.results.values())

    def report(self) -> None:
        print("=" * 60)
        print("📋 SMOKE TEST SUMMARY")
        print("=" * 60)
        for n, ok in self.results.items():
            print(f"{'✅' if ok else '❌'} {MODULES[n]}")
        passed = sum(self.results.values())
        print(f"\n📊 {passed}/{len(self.results)} modules passed")


def _select(argv: List[str]) -> List[int]:
    if not argv:
        return sorted(MODULES)
    if argv == ["quick"]:
        return QUICK
    return [int(a) for a in argv]


def main(argv: List[str] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    return 0 if SmokeTestRunner(_select(argv)).run() else 1


if __name__ == "__main__":
    sys.exit(main())
