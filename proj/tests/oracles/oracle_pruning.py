#!/usr/bin/env python3
"""Independent oracle for staged pruning.

DF ranking: distinct tokens by (count desc, token asc). Stages run only while
the running sequence still exceeds cap:
  1. drop stopwords
  2. drop tokens in the top floor(0.05 * V) of the ranking
  3. drop tokens in the top floor(0.30 * V) of the ranking
prune_section additionally head-truncates to cap. Order always preserved.
"""

# Four DF documents (distinct-token presence counts).
DOCS = [
    ["alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel",
     "india", "julia", "kilo", "lima", "mike", "nov", "oscar", "papa",
     "quebec", "romeo", "sierra", "tango"],
    ["alpha", "bravo", "charlie", "delta", "echo", "fox", "golf", "hotel",
     "india"],
    ["alpha", "bravo", "charlie", "delta", "echo"],
    ["alpha", "bravo"],
]

STOPWORDS = {"the", "of", "and"}

SECTION = ["the", "alpha", "julia", "of", "bravo", "kilo", "charlie", "and",
           "lima", "alpha", "delta", "mike", "echo", "fox", "nov", "golf",
           "oscar", "the", "hotel", "papa", "india", "quebec", "romeo",
           "sierra", "tango", "julia"]

CAPS = [30, 26, 25, 20, 10]


def ranking(docs):
    counts = {}
    for doc in docs:
        for token in set(doc):
            counts[token] = counts.get(token, 0) + 1
    return sorted(counts, key=lambda t: (-counts[t], t)), counts


def top_fraction(rank, fraction):
    return set(rank[: int(fraction * len(rank))])


def prune_stages(section, cap, rank):
    if len(section) <= cap:
        return list(section)
    out = [t for t in section if t not in STOPWORDS]
    if len(out) <= cap:
        return out
    top5 = top_fraction(rank, 0.05)
    out = [t for t in out if t not in top5]
    if len(out) <= cap:
        return out
    top30 = top_fraction(rank, 0.30)
    return [t for t in out if t not in top30]


def main():
    rank, counts = ranking(DOCS)
    print("V =", len(rank))
    print("ranking =", rank)
    print("counts =", {t: counts[t] for t in rank})
    print("top5% =", sorted(top_fraction(rank, 0.05)))
    print("top30% =", sorted(top_fraction(rank, 0.30)))
    print("len(section) =", len(SECTION))
    for cap in CAPS:
        staged = prune_stages(SECTION, cap, rank)
        final = staged[:cap] if len(staged) > cap else staged
        print(f"cap={cap}: stages({len(staged)}) = {staged}")
        if final != staged:
            print(f"cap={cap}: final({len(final)})  = {final}")


if __name__ == "__main__":
    main()
