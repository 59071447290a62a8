#!/usr/bin/env python3
"""Simulation reference for the noisy mock backend and pooled macro-F1.

Replays the documented noisy-mock rule (per-statement splitmix64 draw keyed
on seed XOR id, flip the gold label when the draw falls below the class flip
probability) over the 2000-item synthetic balanced corpus, then computes the
pooled macro-F1 from scratch. Prints the frozen expectation for the tests.
"""
MASK = (1 << 64) - 1


def splitmix64_first(seed):
    state = (seed + 0x9E3779B97F4A7C15) & MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return (z ^ (z >> 31)) & MASK


def unit_draw(seed, statement_id):
    u = splitmix64_first(seed ^ statement_id)
    return (u >> 11) * (1.0 / 9007199254740992.0)


def noisy_prediction(gold, statement_id, p0, p1, seed):
    p = p0 if gold == 0 else p1
    if unit_draw(seed, statement_id) < p:
        return 1 - gold
    return gold


def macro_f1(counts):
    # counts[gold][pred]
    f1s = []
    for c in (0, 1):
        tp = counts[c][c]
        fp = counts[1 - c][c]
        fn = counts[c][1 - c]
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        f1s.append(f1)
    return sum(f1s) / 2


if __name__ == "__main__":
    n, p0, p1, seed = 2000, 0.3, 0.3, 7
    counts = [[0, 0], [0, 0]]
    for i in range(n):
        gold = i % 2
        pred = noisy_prediction(gold, i, p0, p1, seed)
        counts[gold][pred] += 1
    print("confusion [gold][pred]:", counts)
    print("pooled macro-F1: %.12f" % macro_f1(counts))
