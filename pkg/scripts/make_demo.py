"""Regenerate the synthetic demo exports under demo/.

Deterministic: a fixed seed drives every choice, so re-running this script
reproduces byte-identical fixtures. The corpus is planted with known
structure so the demo pipeline exercises every stage:

  - per-year record counts near a quadratic curve over 2002-2015
  - cross-database duplicates of three flavors (exact re-export, venue
    drift caught by the title-only pass, year off by one)
  - a handful of authorless records
  - biology-flavored false positives matching the exclusion vocabulary
  - a citation sidecar covering most records plus orphan keys

Usage: python3 scripts/make_demo.py [demo-dir]
"""

from __future__ import annotations

import os
import random
import sys

SEED = 20160426

VENUES = [
    "Physical Review E", "Journal of Statistical Mechanics",
    "Proceedings of the National Academy of Sciences", "Physica A",
    "IEEE Transactions on Knowledge and Data Engineering",
    "ACM Computing Surveys", "Social Networks", "Data Mining and Knowledge Discovery",
    "International Conference on Data Mining", "European Physical Journal B",
    "Knowledge and Information Systems", "Complex Networks Workshop",
]

SURNAMES = [
    "Alvarez", "Bianchi", "Chen", "Dimitrov", "Eriksson", "Fernandez",
    "Gupta", "Hofmann", "Ivanov", "Jansen", "Kowalski", "Larsen", "Moreau",
    "Nakamura", "Okafor", "Petrov", "Quintana", "Rossi", "Silva", "Tanaka",
    "Ueda", "Vasquez", "Weber", "Xu", "Yilmaz", "Zhang",
]
INITIALS = "ABCDEFGHJKLMNPRST"

# one entry per category in demo/rules/categories.rules; the title fragment
# and keywords are chosen so the category query matches
CATEGORY_FLAVORS = [
    ("hierarchical", [
        ("Hierarchical clustering of community structure in {domain} networks",
         ["hierarchical clustering", "community detection", "dendogram"]),
        ("A divisive algorithm based on the Girvan-Newman method for community detection",
         ["girvan-newman", "divisive algorithm", "community structure"]),
        ("Agglomerative algorithms for detecting community structure in graphs",
         ["agglomerative algorithm", "hierarchical partition", "graph clustering"]),
    ]),
    ("modularity", [
        ("Modularity optimization for community detection in {domain} networks",
         ["modularity", "optimization", "community detection"]),
        ("Greedy modularity maximization for graph clustering at scale",
         ["modularity", "greedy", "graph clustering"]),
        ("Community detection with the Louvain modularity heuristic",
         ["modularity", "louvain", "community structure"]),
        ("Simulated annealing for modularity based community detection",
         ["modularity", "simulated annealing", "community detection"]),
    ]),
    ("overlapping", [
        ("Detecting overlapping communities in {domain} networks",
         ["overlapping communities", "community detection", "clique percolation"]),
        ("CFinder and the clique percolation method for overlapping community structure",
         ["cfinder", "overlapping communities", "community structure"]),
    ]),
    ("fuzzy", [
        ("Fuzzy clustering for community detection in weighted graphs",
         ["fuzzy clustering", "community detection", "membership degree"]),
        ("Fuzzy communities and the c-mean algorithm in complex networks",
         ["fuzzy communities", "c-mean", "community structure"]),
    ]),
    ("partitional", [
        ("Partitional clustering of {domain} graphs with k-means seeding",
         ["partitional clustering", "k-means", "graph clustering"]),
        ("K-center heuristics for partitional community detection",
         ["k-center", "partitional clustering", "community detection"]),
        ("Lloyd style iterative refinement for graph partitioning into communities",
         ["lloyd", "k-means", "community structure"]),
    ]),
    ("spectral", [
        ("Spectral clustering using the graph Laplacian for community detection",
         ["spectral clustering", "laplacian", "community detection"]),
        ("Eigenvector methods for community structure in {domain} networks",
         ["eigenvector", "spectral method", "community structure"]),
        ("Spectral partitioning of sparse graphs into communities",
         ["spectral partitioning", "laplacian", "graph clustering"]),
    ]),
    ("dynamic", [
        ("Dynamic Potts model approach to community detection",
         ["dynamic", "potts", "community detection"]),
        ("Random walk dynamics for graph clustering in {domain} networks",
         ["dynamic", "random walk", "graph clustering"]),
        ("Markov processes and synchronization for dynamic community structure",
         ["dynamic", "markov", "synchronization", "community structure"]),
    ]),
]

FALSE_POSITIVE_TITLES = [
    ("Community detection in microbial ecosystems of {domain} habitats",
     ["microbial communities", "ecosystem", "community detection"]),
    ("Graph clustering of marine plankton interaction networks",
     ["marine ecology", "plankton", "graph clustering"]),
    ("Community structure of bacterial networks in plant root systems",
     ["bacterial communities", "plant", "community structure"]),
    ("Detecting communities of parasites in host interaction graphs",
     ["parasite", "host network", "community detection"]),
    ("Climate driven shifts in ecological community structure",
     ["climate", "ecological communities", "community structure"]),
]

DOMAINS = ["social", "biological", "citation", "collaboration", "communication",
           "transport", "financial", "web"]

ABSTRACT_TEMPLATES = [
    "We study {topic} and evaluate the approach on {domain} networks. "
    "Results show consistent improvements over baseline partitioning methods.",
    "This paper presents a method for {topic}. Experiments on benchmark graphs "
    "demonstrate the scalability and accuracy of the proposed algorithm.",
    "We revisit {topic} from an algorithmic perspective and characterize the "
    "conditions under which the detected partition is stable.",
]


def year_counts() -> dict[int, int]:
    rng = random.Random(SEED + 1)
    counts = {}
    for year in range(2002, 2016):
        base = 3 + round(0.8 * (year - 2002) ** 2)
        counts[year] = max(1, base + rng.choice([-1, 0, 1]))
    return counts


def make_authors(rng: random.Random) -> list[str]:
    n = rng.choice([1, 2, 2, 3])
    picked = rng.sample(SURNAMES, n)
    return [f"{surname}, {rng.choice(INITIALS)}." for surname in picked]


class Record(dict):
    pass


def build_records():
    rng = random.Random(SEED)
    clean: list[Record] = []
    counts = year_counts()
    seq = 0
    for year in sorted(counts):
        for _ in range(counts[year]):
            category, flavors = CATEGORY_FLAVORS[seq % len(CATEGORY_FLAVORS)]
            template, keywords = rng.choice(flavors)
            domain = rng.choice(DOMAINS)
            title = template.format(domain=domain)
            # titles must stay unique or dedup would (correctly) collapse them
            title = f"{title} ({year} study {seq})"
            abstract = rng.choice(ABSTRACT_TEMPLATES).format(
                topic=keywords[0], domain=domain)
            clean.append(Record(
                title=title, year=year, authors=make_authors(rng),
                venue=rng.choice(VENUES), volume=str(rng.randint(1, 99)),
                start_page=rng.randint(1, 400), length=rng.randint(4, 24),
                abstract=abstract, keywords=list(keywords),
                ty=rng.choice(["JOUR", "JOUR", "JOUR", "CONF"]),
                category=category,
            ))
            seq += 1

    fps: list[Record] = []
    for i in range(18):
        template, keywords = FALSE_POSITIVE_TITLES[i % len(FALSE_POSITIVE_TITLES)]
        year = rng.randint(2004, 2015)
        title = template.format(domain=rng.choice(["coastal", "forest", "soil"]))
        title = f"{title} (survey {i})"
        fps.append(Record(
            title=title, year=year, authors=make_authors(rng),
            venue="Ecology Letters", volume=str(rng.randint(1, 40)),
            start_page=rng.randint(1, 200), length=rng.randint(4, 18),
            abstract="Field observations of species assemblages are analysed "
                     "with network tools to map ecological communities.",
            keywords=list(keywords), ty="JOUR", category=None,
        ))

    authorless: list[Record] = []
    for i in range(9):
        category, flavors = CATEGORY_FLAVORS[i % len(CATEGORY_FLAVORS)]
        template, keywords = rng.choice(flavors)
        year = rng.randint(2003, 2015)
        title = template.format(domain=rng.choice(DOMAINS))
        authorless.append(Record(
            title=f"{title} (editorial note {i})", year=year, authors=[],
            venue=rng.choice(VENUES), volume=str(rng.randint(1, 99)),
            start_page=rng.randint(1, 400), length=3,
            abstract=None, keywords=list(keywords), ty="JOUR", category=category,
        ))

    return clean, fps, authorless


def duplicate_of(rng: random.Random, rec: Record) -> Record:
    """A degraded re-export of rec, as a second database would emit it."""
    dup = Record(rec)
    dup["authors"] = list(rec["authors"])
    dup["keywords"] = list(rec["keywords"][:2])
    dup["abstract"] = None          # duplicates are poorer, so the original wins
    flavor = rng.choice(["exact", "venue-drift", "year-off"])
    if flavor == "exact":
        dup["title"] = rec["title"].upper()
    elif flavor == "venue-drift":
        venue = rec["venue"]
        dup["venue"] = "".join(w[0] for w in venue.split()).upper()  # crude abbreviation
        dup["volume"] = None
    else:
        dup["year"] = rec["year"] + 1
        dup["volume"] = None
    return dup


def ris_record(rec: Record) -> str:
    lines = [f"TY  - {rec['ty']}"]
    for author in rec["authors"]:
        lines.append(f"AU  - {author}")
    lines.append(f"TI  - {rec['title']}")
    lines.append(f"PY  - {rec['year']}")
    if rec.get("venue"):
        lines.append(f"JO  - {rec['venue']}")
    if rec.get("volume"):
        lines.append(f"VL  - {rec['volume']}")
    if rec.get("start_page"):
        lines.append(f"SP  - {rec['start_page']}")
        lines.append(f"EP  - {rec['start_page'] + rec['length']}")
    if rec.get("abstract"):
        lines.append(f"AB  - {rec['abstract']}")
    for kw in rec["keywords"]:
        lines.append(f"KW  - {kw}")
    lines.append("ER  - ")
    return "\n".join(lines) + "\n\n"


def main() -> None:
    demo_dir = sys.argv[1] if len(sys.argv) > 1 else \
        os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "demo")
    exports = os.path.join(demo_dir, "exports")
    rules = os.path.join(demo_dir, "rules")
    os.makedirs(exports, exist_ok=True)
    os.makedirs(rules, exist_ok=True)

    rng = random.Random(SEED + 2)
    clean, fps, authorless = build_records()

    pool = clean + fps + authorless
    rng.shuffle(pool)
    split = int(len(pool) * 0.7)
    scopus = pool[:split]
    wos = pool[split:]

    dup_sources = rng.sample(scopus, max(1, int(len(scopus) * 0.16)))
    duplicates = [duplicate_of(rng, rec) for rec in dup_sources]
    wos = wos + duplicates
    rng.shuffle(wos)

    with open(os.path.join(exports, "scopus.ris"), "w", encoding="utf-8") as fh:
        for rec in scopus:
            fh.write(ris_record(rec))
    with open(os.path.join(exports, "wos.ris"), "w", encoding="utf-8") as fh:
        for rec in wos:
            fh.write(ris_record(rec))

    # citation sidecar: most clean records, keyed by raw title; two orphans
    cite_rng = random.Random(SEED + 3)
    rows = [("key", "citations")]
    for rec in clean:
        if cite_rng.random() < 0.8:
            age = 2016 - rec["year"]
            rows.append((rec["title"], str(cite_rng.randint(0, 14) * age)))
    rows.append(("A withdrawn manuscript on modular graphs", "12"))
    rows.append(("Community detection methods that never shipped", "3"))
    with open(os.path.join(exports, "citations.csv"), "w", encoding="utf-8",
              newline="") as fh:
        import csv
        csv.writer(fh).writerows(rows)

    with open(os.path.join(rules, "exclusions.rules"), "w", encoding="utf-8") as fh:
        fh.write(
            "# records from ecology and life sciences that match the topical\n"
            "# queries by vocabulary accident\n"
            "biology-noise :: auto-remove :: microbial* OR ecosystem* OR ecologic* "
            "OR bacterial OR marine OR plant* OR parasit* OR climate\n")

    with open(os.path.join(rules, "review.rules"), "w", encoding="utf-8") as fh:
        fh.write(
            "# same vocabulary, but routed through a human review session;\n"
            "# used to demonstrate the halt-and-resume flow\n"
            "biology-noise :: flag-for-review :: microbial* OR ecosystem* OR ecologic* "
            "OR bacterial OR marine OR plant* OR parasit* OR climate\n")

    with open(os.path.join(rules, "categories.rules"), "w", encoding="utf-8") as fh:
        fh.write("\n".join([
            'hierarchical :: all :: "hierarchical cluster*" OR "hierarchical partition*" '
            'OR girvan-newman OR ravasz OR dendogram* OR "agglomerative algorithm*" '
            'OR "divisive algorithm*"',
            'modularity :: all :: modularity AND (greedy OR optimiz* OR '
            '"simulated annealing" OR "genetic algorithm*" OR louvain)',
            'overlapping :: all :: "overlapping communit*" OR cfinder OR '
            '"fuzzy communit*" OR "fuzzy cluster*" OR c-mean',
            'fuzzy :: all :: "fuzzy communit*" OR "fuzzy cluster*" OR c-mean',
            'partitional :: all :: "partitional cluster*" OR k-mean* OR k-cluster* '
            'OR k-center* OR k-median OR lloyd',
            'spectral :: all :: "spectral cluster*" OR "spectral partition*" OR '
            '"spectral method*" OR laplacian OR eigenvector*',
            'dynamic :: all :: dynamic AND (potts OR "random walk*" OR markov '
            'OR synchronization)',
        ]) + "\n")

    planted = {
        "clean": len(clean),
        "false_positives": len(fps),
        "authorless": len(authorless),
        "duplicates": len(duplicates),
        "scopus": len(scopus),
        "wos": len(wos),
        "expected_after_dedup": len(pool),
        "expected_final": len(clean),
    }
    print("demo fixtures written:", planted)


if __name__ == "__main__":
    main()
