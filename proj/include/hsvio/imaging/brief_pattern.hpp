#pragma once

// Generated by tools/gen_brief_pattern.py (numpy default_rng, seed 20250917). Do not edit.

#include <array>

namespace hsvio::detail {

struct BriefTest {
  signed char x1, y1, x2, y2;
};

inline constexpr std::array<BriefTest, 256> kBriefPattern{{
    {10, -1, -9, 5}, {4, -15, -15, -2}, {-9, -2, -6, -9}, {2, -9, -1, 0},
    {-8, -2, 2, 2}, {-6, 5, 4, 5}, {4, 1, -2, 1}, {-6, 0, -2, 3},
    {-6, 4, 0, -10}, {-10, -11, -7, -5}, {3, 10, -5, 7}, {3, 5, -2, -4},
    {-9, 6, -2, -4}, {0, 6, 2, 0}, {-2, -2, 4, 3}, {13, -7, 0, -10},
    {-6, -15, 1, 6}, {10, 5, -2, -3}, {14, -5, 7, 12}, {-7, -1, 2, -15},
    {-10, -11, -1, 0}, {5, 0, 4, 1}, {-4, -15, 4, 12}, {-3, -2, 3, 0},
    {-2, -6, -9, 1}, {1, -7, -1, 0}, {-11, 9, 7, 2}, {-10, 12, -6, -3},
    {8, -3, 0, 6}, {7, -10, 1, -6}, {15, -11, 3, -2}, {12, 4, 6, 15},
    {-4, 3, 8, 4}, {1, 4, -3, -10}, {0, -9, 0, 10}, {-10, 4, -2, 8},
    {7, 3, 12, -1}, {-9, 1, -4, 1}, {-9, 5, -15, -1}, {0, -8, -4, -7},
    {1, 4, -4, 6}, {-3, -5, -8, -8}, {0, -7, 1, 4}, {-4, 9, 12, -9},
    {-1, 2, -12, -12}, {7, 2, 2, 2}, {7, 2, 1, -4}, {5, -1, -3, -11},
    {-1, -10, -8, 6}, {-5, 12, -2, -10}, {-10, -8, 5, -4}, {-10, 6, -2, 10},
    {5, -2, -3, -10}, {-5, 10, -4, -13}, {0, 9, -9, -5}, {6, 1, 2, 2},
    {9, 5, 0, 6}, {8, -6, -6, 8}, {-9, 11, -12, -11}, {6, -3, 9, 2},
    {-7, 0, -4, 2}, {4, 4, 5, -13}, {11, -4, -4, 9}, {-4, 2, 4, 3},
    {0, 2, -7, -7}, {-10, 12, 5, 5}, {-4, 0, -3, -10}, {5, 11, 0, 2},
    {1, 1, -13, 13}, {5, -13, -9, -6}, {-1, 1, 8, 8}, {1, -6, 12, 10},
    {-8, 3, 3, 0}, {6, 2, 9, -3}, {1, 6, -9, 4}, {-15, 6, -3, -2},
    {2, 8, -6, 5}, {-13, 4, 0, 9}, {-1, -6, -3, 0}, {7, 1, -2, 2},
    {0, -2, 1, -7}, {-4, 0, 7, 4}, {-12, 8, -9, 2}, {-8, 7, 2, -5},
    {6, 8, -5, 3}, {7, 2, 0, -11}, {3, 9, 2, 1}, {-8, 0, -11, -2},
    {1, -1, 0, 9}, {-11, 10, -5, 0}, {0, -7, 3, -6}, {4, 2, 8, -1},
    {6, 4, -14, -1}, {-2, -3, -6, 3}, {-1, -8, 3, -1}, {-6, 11, 13, 0},
    {-2, -2, -2, 5}, {-3, -9, -1, 13}, {6, 9, 4, -2}, {-12, -6, 7, -7},
    {6, -6, 4, 1}, {-7, 8, 0, -10}, {-15, -5, 5, 5}, {10, -7, -14, 1},
    {7, -2, 2, 3}, {4, 0, -2, -1}, {-6, 0, 3, -2}, {-3, -7, -11, 1},
    {-1, -3, -2, -1}, {6, -2, 10, 6}, {3, 5, -4, -2}, {10, 2, -14, 3},
    {1, 4, 0, -1}, {15, -7, 2, -9}, {-7, 2, 7, -2}, {4, 1, 1, 11},
    {9, -1, -3, 3}, {9, -15, 5, 6}, {-3, 12, -1, -5}, {2, -9, 11, 7},
    {5, 1, 10, 2}, {-1, -2, 8, -4}, {-2, -7, -6, 7}, {1, -4, -11, 14},
    {-3, 2, -13, -15}, {-4, -14, 12, 5}, {2, -1, -3, 4}, {0, -10, -7, -8},
    {-13, -2, -1, 11}, {2, -3, -6, 3}, {5, 3, 3, -3}, {3, -1, 4, 10},
    {0, 8, 8, 7}, {3, 9, -15, 1}, {2, -2, -2, 1}, {0, 3, 1, 8},
    {3, 1, 5, -7}, {-5, 6, 9, 1}, {-5, -7, -9, -6}, {-1, -7, 9, 3},
    {8, 0, 11, 1}, {9, -7, 1, 1}, {-1, -9, 11, -7}, {-6, -2, 13, -6},
    {5, 9, 9, -7}, {1, -8, -3, -9}, {1, -7, 2, 6}, {-3, -1, 8, -9},
    {3, 3, 2, -8}, {-2, 0, 6, 0}, {-11, 9, 5, 0}, {0, -3, 2, 12},
    {-5, -7, -1, -7}, {-4, -5, -6, -4}, {11, 2, 6, 4}, {-1, -8, 4, -5},
    {-12, -5, 5, -9}, {-1, -1, -14, 4}, {-4, -8, -7, 8}, {-5, 9, 0, 3},
    {3, 6, -1, 6}, {-3, 0, 7, -1}, {-11, -3, -6, 9}, {2, 9, -1, -5},
    {2, 11, 0, 3}, {7, -2, -5, -2}, {-7, 1, -5, -6}, {-7, -1, 2, -8},
    {-3, 4, -6, 5}, {1, 6, 5, 10}, {2, 2, 5, -3}, {-5, -10, 3, 4},
    {-5, -3, -3, 7}, {-4, 4, -2, 11}, {-1, 0, -7, 6}, {5, -5, -4, -1},
    {-1, 2, 15, 4}, {0, 2, -1, 6}, {8, -14, -5, 9}, {12, -15, 14, 5},
    {11, 2, 0, 3}, {-4, 8, -7, -2}, {1, -3, 6, 6}, {0, 9, 1, 2},
    {-1, 2, 0, 6}, {-2, 5, -9, -7}, {4, -3, -2, -1}, {13, 5, 2, -3},
    {-8, 7, -8, 9}, {7, -3, 6, 6}, {-5, 0, 15, 2}, {6, 1, 4, -8},
    {8, -7, -6, 12}, {7, -9, 2, -7}, {1, -1, -8, 6}, {-1, -2, 1, 0},
    {8, -2, 8, -8}, {-1, 2, 0, 0}, {-6, 6, -6, 4}, {8, 5, -9, -4},
    {2, -2, 11, 1}, {-2, 2, 6, -4}, {-9, 1, 3, 4}, {-3, 6, -8, -12},
    {-7, -12, -7, -10}, {-7, -5, -9, 11}, {8, -8, -3, -10}, {-6, 6, 2, 4},
    {9, -9, 7, 9}, {-2, -10, -5, -3}, {4, 2, -6, -4}, {2, 2, 3, -2},
    {-4, -7, 15, -3}, {-4, 3, 6, -6}, {-6, 4, 9, -14}, {9, 2, 5, -2},
    {-2, -6, 4, 1}, {-12, -10, -5, -7}, {-3, -2, 1, 5}, {9, -7, 15, -8},
    {7, -3, -4, -1}, {-3, 1, 6, -4}, {8, 6, -14, 7}, {-8, 1, -7, 0},
    {-11, 11, 2, -2}, {1, -5, 6, -1}, {12, -2, 3, -2}, {12, -9, 5, 0},
    {-13, 3, 0, 1}, {4, 1, 7, -2}, {4, -10, -9, -8}, {-1, -1, -5, 0},
    {-15, -3, -4, 10}, {1, -4, 3, -1}, {-4, -1, 4, -4}, {2, -3, -4, -1},
    {-4, 6, -13, 5}, {10, 15, -4, -2}, {-5, 7, -7, 10}, {-1, -3, -1, -1},
    {-13, 8, -4, -12}, {-2, -5, 0, -3}, {-4, -1, -2, 2}, {-3, 15, 3, 2},
    {8, -13, 5, 10}, {4, 3, -15, 15}, {-7, -1, -15, 0}, {-2, 8, 6, -4},
    {-1, -9, -4, -7}, {-6, -4, 12, -3}, {-8, -3, 4, 12}, {-5, 3, -1, 11},
    {-10, 5, -8, -1}, {-8, 2, 3, -6}, {-10, -9, -7, 3}, {11, 5, 13, 5},
}};

}  // namespace hsvio::detail
