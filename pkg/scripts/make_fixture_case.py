#!/usr/bin/env python3
"""Generate a synthetic case directory (manifest, graded tumor
annotation, biased navigation sessions) for demos and benchmarking.

Example:
    python3 scripts/make_fixture_case.py /tmp/demo-case --observers 8 --bias 0.8
"""

import argparse

from wsi_attention import synthetic


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("case_dir", help="output directory to create")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--observers", type=int, default=8)
    parser.add_argument(
        "--bias",
        type=float,
        default=0.8,
        help="fraction of viewports centered inside tumor regions",
    )
    parser.add_argument("--width", type=int, default=4000)
    parser.add_argument("--height", type=int, default=4000)
    args = parser.parse_args()
    synthetic.make_case(
        args.case_dir,
        seed=args.seed,
        n_observers=args.observers,
        bias=args.bias,
        width_px=args.width,
        height_px=args.height,
    )
    print(f"wrote synthetic case to {args.case_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
