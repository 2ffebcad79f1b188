#!/usr/bin/env python3
"""Extract the WordNet 3.0 mammal hypernym closure as a parent<TAB>child TSV.

Usage: make_mammal.py <wordnet-3.0 dict dir> <out.tsv>

Reads data.noun / index.noun directly (no NLTK needed). The closure follows
regular hypernym pointers and, for instances, instance-hypernym pointers, as
in the usual poincare-embeddings extraction. The mammal.n.01 root itself is
dropped, leaving a 4-component forest of 1,179 nodes / 5,361 closure edges.
"""
import functools
import sys


def load(dict_dir):
    hyper, inst, first_lemma = {}, {}, {}
    with open(f"{dict_dir}/data.noun", encoding="latin-1") as fh:
        for line in fh:
            if line.startswith("  "):
                continue
            fields = line.split("|")[0].split()
            offset = fields[0]
            w_cnt = int(fields[3], 16)
            first_lemma[offset] = fields[4].lower()
            i = 4 + 2 * w_cnt
            p_cnt = int(fields[i])
            ptrs = fields[i + 1:i + 1 + 4 * p_cnt]
            hyper[offset] = [ptrs[j + 1] for j in range(0, len(ptrs), 4) if ptrs[j] == "@"]
            inst[offset] = [ptrs[j + 1] for j in range(0, len(ptrs), 4) if ptrs[j] == "@i"]
    sense_no = {}
    with open(f"{dict_dir}/index.noun", encoding="latin-1") as fh:
        for line in fh:
            if line.startswith("  "):
                continue
            fields = line.split()
            for n, off in enumerate(fields[-int(fields[2]):], 1):
                sense_no[(fields[0], off)] = n
    names = {off: f"{lem}.n.{sense_no[(lem, off)]:02d}" for off, lem in first_lemma.items()}
    return hyper, inst, names


def main():
    dict_dir, out = sys.argv[1], sys.argv[2]
    hyper, inst, names = load(dict_dir)

    @functools.lru_cache(maxsize=None)
    def closure(off):
        acc = set()
        for h in hyper[off]:
            acc.add(h)
            acc |= closure(h)
        return frozenset(acc)

    # (hyponym, hypernym) pairs
    pairs = set()
    for off in hyper:
        pairs.update((off, h) for h in closure(off))
        for h in inst[off]:
            pairs.add((off, h))
            pairs.update((off, g) for g in closure(h))

    root = next(o for o, n in names.items() if n == "mammal.n.01")
    mammals = {a for a, b in pairs if b == root}
    edges = sorted(
        (names[b], names[a]) for a, b in pairs if a in mammals and b in mammals
    )
    with open(out, "w") as fh:
        fh.write("# WordNet 3.0 mammal.n.01 closure without the root (parent<TAB>child)\n")
        for p, c in edges:
            fh.write(f"{p}\t{c}\n")
    nodes = {x for e in edges for x in e}
    print(f"{len(nodes)} nodes, {len(edges)} edges", file=sys.stderr)


if __name__ == "__main__":
    main()
