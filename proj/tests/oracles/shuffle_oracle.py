#!/usr/bin/env python3
"""Standalone reference for the seeded shuffle and few-shot draw.

Implements splitmix64 and the last-to-first Fisher-Yates swap with modulo
range reduction, independently of the C++ code. Run it to print the frozen
expectations used by the unit tests.
"""
MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return (z ^ (z >> 31)) & MASK


def fisher_yates(items, seed):
    out = list(items)
    rng = SplitMix64(seed)
    for i in range(len(out) - 1, 0, -1):
        j = rng.next() % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def few_shot_draw(pool, seed, label, count):
    """Draw `count` items from `pool` (order-preserving removal)."""
    rng = SplitMix64(seed ^ label)
    remaining = list(pool)
    picked = []
    for _ in range(count):
        j = rng.next() % len(remaining)
        picked.append(remaining.pop(j))
    return picked


if __name__ == "__main__":
    print("shuffle [0..4] seed 42:", fisher_yates(range(5), 42))
    print("shuffle [0..9] seed 7:", fisher_yates(range(10), 7))
    print("shuffle [0..2] seed 0:", fisher_yates(range(3), 0))
    print("first 4 draws of splitmix64(42):",
          [SplitMix64(42).next() for _ in range(1)] +
          [hex(x) for x in []])
    rng = SplitMix64(42)
    print("splitmix64(42) first 3:", [rng.next() for _ in range(3)])

    unbiased = [0, 2, 4, 6, 8, 10, 12, 14, 16, 18]
    biased = [1, 3, 5, 7, 9, 11, 13, 15, 17, 19]
    print("few-shot seed 42 k=8, label-0 ids:", few_shot_draw(unbiased, 42, 0, 4))
    print("few-shot seed 42 k=8, label-1 ids:", few_shot_draw(biased, 42, 1, 4))
