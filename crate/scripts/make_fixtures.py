#!/usr/bin/env python3
"""Regenerate the bundled desk-scale fixtures.

Writes, under fixtures/:
  uniprot_sample.tsv     synthetic UniProt-style TSV export (input of `psl import`)
  proteins.jsonl         the same records in the protein JSONL schema
  eval_items.jsonl       small evaluation dataset (description + QA tasks)
  prune_golden.json      retained grouping nodes for fixtures/prune_params.toml,
                         computed by the standalone pruning routine below

The pruning routine here is written independently of the Rust crate and is the
oracle for the golden test. Output is deterministic (fixed seed).
"""

import json
import random
from collections import defaultdict
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
FIX = ROOT / "fixtures"
AA = "ACDEFGHIKLMNPQRSTVWY"
SEED = 20240117

# archetype: (name stem, function, location, family, similarity, motif, go terms)
ARCHETYPES = [
    ("zinc metalloprotease", "Catalyzes the hydrolysis of peptide bonds in misfolded proteins using a catalytic zinc ion.",
     "Cytoplasm", "Peptidase M48 family", "Belongs to the peptidase M48 family.", "HEXXH",
     ["GO:0008233", "GO:0008270", "GO:0006508", "GO:0005737"]),
    ("serine protease", "Serine endopeptidase that degrades damaged proteins during heat stress.",
     "Periplasm", "Peptidase S1C family", "Belongs to the peptidase S1C family.", None,
     ["GO:0008233", "GO:0006508", "GO:0009408"]),
    ("fatty acid synthase subunit", "Catalyzes the elongation of fatty acyl chains during fatty acid biosynthesis.",
     "Cytoplasm", "Thiolase-like superfamily", "Belongs to the thiolase-like superfamily.", None,
     ["GO:0016740", "GO:0006633", "GO:0005737"]),
    ("lipase", "Hydrolyzes ester bonds of triacylglycerols releasing free fatty acids.",
     "Secreted", "AB hydrolase superfamily", "Belongs to the AB hydrolase superfamily. Lipase family.", "GXSXG",
     ["GO:0016788", "GO:0006629"]),
    ("serine/threonine-protein kinase", "Phosphorylates target proteins to regulate progression through the cell cycle.",
     "Nucleus", "Protein kinase superfamily", "Belongs to the protein kinase superfamily. Ser/Thr protein kinase family.", None,
     ["GO:0016301", "GO:0007049", "GO:0005634"]),
    ("DNA-binding transcriptional regulator", "Binds promoter DNA and represses genes of the oxidative stress response.",
     "Nucleus", "LysR transcriptional regulatory family", "Belongs to the LysR transcriptional regulatory family.", "HTH",
     ["GO:0003677", "GO:0006979", "GO:0005634"]),
    ("ribosomal protein", "Component of the small ribosomal subunit that binds 16S rRNA during translation.",
     "Cytoplasm", "Universal ribosomal protein uS4 family", "Belongs to the universal ribosomal protein uS4 family.", None,
     ["GO:0003723", "GO:0006412", "GO:0032991"]),
    ("superoxide dismutase", "Destroys superoxide anion radicals produced within the cell.",
     "Mitochondrion matrix", "Iron/manganese superoxide dismutase family", "Belongs to the iron/manganese superoxide dismutase family.", None,
     ["GO:0016491", "GO:0046872", "GO:0006979", "GO:0005739"]),
    ("cytochrome c oxidase subunit", "Component of the respiratory chain that transfers electrons to molecular oxygen.",
     "Mitochondrion inner membrane", "Heme-copper respiratory oxidase family", "Belongs to the heme-copper respiratory oxidase family.", None,
     ["GO:0016491", "GO:0006091", "GO:0016020"]),
    ("potassium channel", "Mediates potassium ion transport across the plasma membrane.",
     "Cell membrane", "Potassium channel family", "Belongs to the potassium channel family.", "TVGYG",
     ["GO:0005215", "GO:0006811", "GO:0005886"]),
    ("ABC transporter permease", "Part of an ABC transporter complex responsible for metal ion import.",
     "Cell membrane", "Binding-protein-dependent transport system permease family", "Belongs to the binding-protein-dependent transport system permease family.", None,
     ["GO:0005215", "GO:0046872", "GO:0006811", "GO:0005886"]),
    ("heat shock protein", "Molecular chaperone that prevents protein aggregation at elevated temperature.",
     "Cytoplasm", "Small heat shock protein family", "Belongs to the small heat shock protein (HSP20) family.", None,
     ["GO:0009408", "GO:0005737"]),
    ("capsid protein", "Self-assembles to form the icosahedral capsid that protects the viral genome.",
     "Virion", "Caliciviridae capsid family", "Belongs to the caliciviridae capsid protein family.", None,
     ["GO:0005488", "GO:0032991"]),
]

EXTRA_TERMS = ["GO:0044237", "GO:0006950", "GO:0003676", "GO:0005737", "GO:0019538"]

KINGDOMS = ["Eukaryota", "Bacteria", "Archaea", "Viruses"]
KINGDOM_WEIGHTS = [0.42, 0.38, 0.1, 0.1]
LINEAGES = {
    "Eukaryota": ("Eukaryota, Metazoa, Chordata, Mammalia", "Homo sapiens (Human)"),
    "Bacteria": ("Bacteria, Pseudomonadota, Gammaproteobacteria, Enterobacterales", "Escherichia coli (strain K12)"),
    "Archaea": ("Archaea, Methanobacteriota, Methanococci", "Methanocaldococcus jannaschii"),
    "Viruses": ("Viruses, Riboviria, Pisuviricota", "Norwalk virus"),
}


def mutate(rng, seq, sub_rate, indel_rate):
    out = []
    for ch in seq:
        r = rng.random()
        if r < indel_rate / 2:
            continue
        if r < indel_rate:
            out.append(ch)
            out.append(rng.choice(AA))
            continue
        if rng.random() < sub_rate:
            out.append(rng.choice([a for a in AA if a != ch]))
        else:
            out.append(ch)
    return "".join(out) or seq[:1]


def build_proteins(rng):
    proteins = []
    acc_no = 10000
    fam_id = 0
    # ~62 families of 1..6 members, 200 proteins total
    sizes = []
    while sum(sizes) < 196:
        sizes.append(rng.choice([1, 2, 2, 3, 3, 4, 5, 6]))
    sizes[-1] -= sum(sizes) - 196
    if sizes[-1] <= 0:
        sizes.pop()
        sizes[-1] += 196 - sum(sizes)
    families = []
    for size in sizes:
        arch = ARCHETYPES[fam_id % len(ARCHETYPES)]
        kingdom = "Viruses" if arch[0] == "capsid protein" else rng.choices(KINGDOMS[:3], KINGDOM_WEIGHTS[:3])[0]
        length = rng.randint(60, 320)
        base = "M" + "".join(rng.choice(AA) for _ in range(length - 1))
        terms = list(arch[6])
        if rng.random() < 0.5:
            terms.append(rng.choice(EXTRA_TERMS))
        families.append((fam_id, arch, kingdom, base, sorted(set(terms)), size))
        fam_id += 1
    for fam_id, arch, kingdom, base, terms, size in families:
        for m in range(size):
            seq = base if m == 0 else mutate(rng, base, 0.06, 0.01)
            member_terms = list(terms)
            if m > 0 and rng.random() < 0.3:
                member_terms = sorted(set(member_terms + [rng.choice(EXTRA_TERMS)]))
            acc = "Q%05d" % acc_no
            acc_no += 7
            name = "%s %s%d" % (arch[0][0].upper() + arch[0][1:], "F", fam_id)
            proteins.append({
                "accession": acc,
                "sequence": seq,
                "go_terms": member_terms,
                "superkingdom": kingdom,
                "annotation": {
                    "name": name,
                    "function": arch[1],
                    "location": arch[2],
                    "family": arch[3],
                    "similarity": arch[4],
                    "motif": arch[5],
                },
                "_family": fam_id,
            })
    # unannotated and partly unresolvable records
    for i in range(4):
        acc = "Q%05d" % acc_no
        acc_no += 7
        seq = "M" + "".join(rng.choice(AA) for _ in range(rng.randint(50, 90)))
        proteins.append({
            "accession": acc,
            "sequence": seq,
            "go_terms": [] if i < 3 else ["GO:9999999", "GO:0005737"],
            "superkingdom": KINGDOMS[i],
            "annotation": {
                "name": "Uncharacterized protein U%d" % i,
                "function": None,
                "location": None,
                "family": None,
                "similarity": None,
                "motif": None,
            },
            "_family": -1 - i,
        })
    proteins.sort(key=lambda p: p["accession"])
    return proteins


# ---------------------------------------------------------------------------
# OBO + pruning oracle (independent of the Rust implementation)


def parse_obo(path):
    terms = {}
    stanzas = []
    cur = None
    for line in open(path):
        line = line.strip()
        if line.startswith("["):
            cur = {"is_a": []} if line == "[Term]" else None
            if cur is not None:
                stanzas.append(cur)
            continue
        if cur is None or not line:
            continue
        key, _, val = line.partition(": ")
        val = val.split(" ! ")[0].strip()
        if key == "is_a":
            cur["is_a"].append(val)
        elif key == "is_obsolete":
            cur["obsolete"] = val == "true"
        elif key in ("id", "name", "namespace"):
            cur[key] = val
    for st in stanzas:
        if not st.get("obsolete"):
            terms[st["id"]] = st
    return terms


def ancestors_closure(terms, start):
    seen = set()
    stack = [t for t in start if t in terms]
    while stack:
        t = stack.pop()
        if t in seen:
            continue
        seen.add(t)
        stack.extend(terms[t]["is_a"])
    return seen


def prune_oracle(terms, proteins, lam, beta, tau0, alpha):
    children = defaultdict(set)
    for t, d in terms.items():
        for p in d["is_a"]:
            children[p].add(t)
    roots = sorted(t for t, d in terms.items() if not d["is_a"])
    depth = {}
    frontier = list(roots)
    for r in roots:
        depth[r] = 0
    while frontier:
        nxt = []
        for t in frontier:
            for c in children[t]:
                if c not in depth:
                    depth[c] = depth[t] + 1
                    nxt.append(c)
        frontier = nxt
    count = defaultdict(int)
    total = 0
    for p in proteins:
        clo = ancestors_closure(terms, p["go_terms"])
        if clo:
            total += 1
        for t in clo:
            count[t] += 1

    def support(d):
        return lam * total * (1 + beta * d)

    def tau(d):
        return tau0 * alpha ** d

    retained = {}
    visited = set()

    def visit(v):
        if v in visited:
            return
        visited.add(v)
        pos = [count[c] for c in children[v] if count[c] > 0]
        if len(pos) > 1 and max(pos) / min(pos) > tau(depth[v]):
            retained[v] = "imbalance"
            return
        qual = sorted(c for c in children[v] if count[c] >= support(depth[c]))
        if qual:
            for c in qual:
                visit(c)
        elif count[v] >= support(depth[v]):
            retained[v] = "support"

    for r in roots:
        visit(r)
    return total, count, depth, retained


def main():
    rng = random.Random(SEED)
    proteins = build_proteins(rng)

    with open(FIX / "proteins.jsonl", "w") as f:
        for p in proteins:
            rec = {k: v for k, v in p.items() if not k.startswith("_")}
            rec["annotation"] = {k: v for k, v in rec["annotation"].items() if v is not None}
            f.write(json.dumps(rec, separators=(",", ":")) + "\n")

    header = ["Entry", "Protein names", "Organism", "Taxonomic lineage", "Length", "Sequence",
              "Gene Ontology IDs", "Function [CC]", "Subcellular location [CC]", "Protein families",
              "Sequence similarities", "Motif"]
    with open(FIX / "uniprot_sample.tsv", "w") as f:
        f.write("\t".join(header) + "\n")
        for p in proteins:
            a = p["annotation"]
            lineage, organism = LINEAGES[p["superkingdom"]]
            row = [
                p["accession"],
                a["name"],
                organism,
                lineage,
                str(len(p["sequence"])),
                p["sequence"],
                "; ".join(p["go_terms"]),
                ("FUNCTION: %s {ECO:0000269|PubMed:12345}." % a["function"].rstrip(".")) if a["function"] else "",
                ("SUBCELLULAR LOCATION: %s {ECO:0000305}." % a["location"]) if a["location"] else "",
                a["family"] or "",
                ("SIMILARITY: %s" % a["similarity"]) if a["similarity"] else "",
                ("MOTIF 10..14; /note=\"%s\"" % a["motif"]) if a["motif"] else "",
            ]
            f.write("\t".join(row) + "\n")

    # evaluation items: fresh homologs of fixture families (no accession overlap)
    by_family = defaultdict(list)
    for p in proteins:
        if p["_family"] >= 0:
            by_family[p["_family"]].append(p)
    fam_ids = sorted(by_family)
    picks = rng.sample(fam_ids, 12)
    items = []
    for i, fid in enumerate(sorted(picks)):
        src = by_family[fid][0]
        a = src["annotation"]
        seq = mutate(rng, src["sequence"], 0.08, 0.01)
        if i % 2 == 0:
            items.append({
                "id": "item%02d" % i,
                "sequence": seq,
                "question": "Provide a description of the protein with the given amino acid sequence.",
                "reference": " ".join(x for x in [a["name"] + ".", a["function"], "Located in " + a["location"].lower() + ".", a["similarity"]] if x),
                "task": "description",
            })
        else:
            items.append({
                "id": "item%02d" % i,
                "sequence": seq,
                "question": "Where is this protein located in the cell and what does it do?",
                "reference": "It is found in the %s. %s" % (a["location"].lower(), a["function"]),
                "task": "qa",
            })
    with open(FIX / "eval_items.jsonl", "w") as f:
        for it in items:
            f.write(json.dumps(it, separators=(",", ":")) + "\n")

    params = dict(lam=0.05, beta=0.5, tau0=4.0, alpha=0.9)
    terms = parse_obo(FIX / "toy_go.obo")
    total, count, depth, retained = prune_oracle(terms, proteins, **params)
    golden = {
        "params": {"lambda": 0.05, "beta": 0.5, "tau0": 4.0, "alpha": 0.9, "total_count": total},
        "retained": [{"term_id": t, "rule": retained[t], "depth": depth[t], "count": count[t]}
                     for t in sorted(retained)],
        "counts": {t: count[t] for t in sorted(terms)},
    }
    with open(FIX / "prune_golden.json", "w") as f:
        json.dump(golden, f, indent=2)
        f.write("\n")
    print("proteins", len(proteins), "annotated", total, "terms", len(terms))
    for t in sorted(retained):
        print(" ", t, terms[t]["name"], retained[t], "depth", depth[t], "count", count[t])


if __name__ == "__main__":
    main()
