"""Write a seeded URDF + OBJ corpus (random box assets plus two broken bundles)."""

import argparse
from dataclasses import dataclass

from artikit.fixtures import write_fixture_corpus


@dataclass
class CorpusConfig:
    out: str = "corpus"
    n: int = 8
    seed: int = 0
    broken: bool = True


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("out")
    p.add_argument("--n", type=int, default=CorpusConfig.n)
    p.add_argument("--seed", type=int, default=CorpusConfig.seed)
    p.add_argument("--no-broken", action="store_true")
    a = p.parse_args()
    cfg = CorpusConfig(a.out, a.n, a.seed, not a.no_broken)
    names = write_fixture_corpus(cfg.out, cfg.n, cfg.seed, cfg.broken)
    print(f"wrote {len(names)} bundles to {cfg.out}")


if __name__ == "__main__":
    main()
