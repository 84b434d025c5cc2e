"""Sweep p, element pair and convective mode, one `run` per combination.

Each combination writes its own CSV under the output directory so the three
error tables can be assembled afterwards. Failed combinations are listed and
the sweep carries on.
"""
from __future__ import annotations
import argparse
from pathlib import Path

from nsfem.core.config import settings
from nsfem.main import main as run_cli
from nsfem.models.enums import ConvectiveMode, ElementPair

P_VALUES = ["1.1", "1.2", "1.3", f"{4.0 / 3.0:.15g}", "1.4", "1.5"]
MODES = [ConvectiveMode.RECONSTRUCTION, ConvectiveMode.TEMAM]


def combinations(elements, modes, p_values):
    for element in elements:
        for mode in modes:
            for p in p_values:
                yield element, mode, p


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument('--levels', type=int, default=settings.MAX_CI_LEVEL)
    parser.add_argument('--out-dir', type=Path, default=Path(settings.OUTPUT_DIR))
    parser.add_argument('--element', action='append', choices=[e.value for e in ElementPair],
                        help='restrict to these element pairs (repeatable)')
    parser.add_argument('--full-tables', action='store_true')
    parser.add_argument('--verbose', action='store_true')
    args = parser.parse_args()

    elements = [ElementPair(e) for e in args.element] if args.element else list(ElementPair)
    failed = []
    for element, mode, p in combinations(elements, MODES, P_VALUES):
        out = args.out_dir / f"{element.value}_{mode.value}_p{float(p):.4f}.csv"
        argv = ['run', '--p', p, '--element', element.value, '--convective', mode.value,
                '--levels', str(args.levels), '--out', str(out)]
        if args.full_tables:
            argv.append('--full-tables')
        if args.verbose:
            argv.append('--verbose')
        print(f'{element.value} {mode.value} p={float(p):.4f} -> {out}')
        code = run_cli(argv)
        if code != 0:
            failed.append((element.value, mode.value, p, code))
    if failed:
        print('Failed combinations:')
        for element, mode, p, code in failed:
            print(f' - {element} {mode} p={p} (exit {code})')
    print('Sweep complete.')


if __name__ == '__main__':
    main()
