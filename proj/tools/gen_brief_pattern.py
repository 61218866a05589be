#!/usr/bin/env python3
"""Regenerates include/hsvio/imaging/brief_pattern.hpp.

256 point pairs drawn from an isotropic Gaussian (sigma = patch / 5) on a
31x31 patch, rounded to integer offsets and clipped to the patch. Pairs with
identical endpoints are redrawn.
"""
import sys

import numpy as np

SEED = 20250917
PATCH = 31
HALF = PATCH // 2
SIGMA = PATCH / 5.0


def main(out_path):
    rng = np.random.default_rng(SEED)
    pairs = []
    while len(pairs) < 256:
        a = np.clip(np.rint(rng.normal(0.0, SIGMA, 2)), -HALF, HALF).astype(int)
        b = np.clip(np.rint(rng.normal(0.0, SIGMA, 2)), -HALF, HALF).astype(int)
        if (a == b).all():
            continue
        pairs.append((int(a[0]), int(a[1]), int(b[0]), int(b[1])))
    lines = [
        "#pragma once",
        "",
        "// Generated by tools/gen_brief_pattern.py (numpy default_rng, seed %d). Do not edit." % SEED,
        "",
        "#include <array>",
        "",
        "namespace hsvio::detail {",
        "",
        "struct BriefTest {",
        "  signed char x1, y1, x2, y2;",
        "};",
        "",
        "inline constexpr std::array<BriefTest, 256> kBriefPattern{{",
    ]
    for i in range(0, 256, 4):
        row = " ".join("{%d, %d, %d, %d}," % p for p in pairs[i:i + 4])
        lines.append("    " + row)
    lines += ["}};", "", "}  // namespace hsvio::detail", ""]
    with open(out_path, "w") as f:
        f.write("\n".join(lines))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "include/hsvio/imaging/brief_pattern.hpp")
