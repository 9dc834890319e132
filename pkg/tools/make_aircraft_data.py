#!/usr/bin/env python3
"""Build the bundled FGVC-Aircraft hierarchy JSON and held-out split.

The variant -> family -> manufacturer table is the standard public
FGVC-Aircraft metadata (100 variants, 70 families, 30 manufacturers).
Run from the repo root; writes into src/treeood/data/.
"""

import json
from pathlib import Path

# family -> (manufacturer, [variants])
FAMILIES = {
    "A300": ("Airbus", ["A300B4"]),
    "A310": ("Airbus", ["A310"]),
    "A320": ("Airbus", ["A318", "A319", "A320", "A321"]),
    "A330": ("Airbus", ["A330-200", "A330-300"]),
    "A340": ("Airbus", ["A340-200", "A340-300", "A340-500", "A340-600"]),
    "A380": ("Airbus", ["A380"]),
    "ATR-42": ("ATR", ["ATR-42"]),
    "ATR-72": ("ATR", ["ATR-72"]),
    "An-12": ("Antonov", ["An-12"]),
    "BAE 146": ("British Aerospace", ["BAE 146-200", "BAE 146-300"]),
    "BAE-125": ("British Aerospace", ["BAE-125"]),
    "Beechcraft 1900": ("Beechcraft", ["Beechcraft 1900"]),
    "Boeing 707": ("Boeing", ["707-320"]),
    "Boeing 717": ("Boeing", ["Boeing 717"]),
    "Boeing 727": ("Boeing", ["727-200"]),
    "Boeing 737": ("Boeing", ["737-200", "737-300", "737-400", "737-500",
                              "737-600", "737-700", "737-800", "737-900"]),
    "Boeing 747": ("Boeing", ["747-100", "747-200", "747-300", "747-400"]),
    "Boeing 757": ("Boeing", ["757-200", "757-300"]),
    "Boeing 767": ("Boeing", ["767-200", "767-300", "767-400"]),
    "Boeing 777": ("Boeing", ["777-200", "777-300"]),
    "C-130": ("Lockheed Corporation", ["C-130"]),
    "C-47": ("Douglas Aircraft Company", ["C-47"]),
    "CRJ-200": ("Canadair", ["CRJ-200"]),
    "CRJ-700": ("Canadair", ["CRJ-700", "CRJ-900"]),
    "Cessna 172": ("Cessna", ["Cessna 172"]),
    "Cessna 208": ("Cessna", ["Cessna 208"]),
    "Cessna Citation": ("Cessna", ["Cessna 525", "Cessna 560"]),
    "Challenger 600": ("Canadair", ["Challenger 600"]),
    "DC-10": ("McDonnell Douglas", ["DC-10"]),
    "DC-3": ("Douglas Aircraft Company", ["DC-3"]),
    "DC-6": ("Douglas Aircraft Company", ["DC-6"]),
    "DC-8": ("Douglas Aircraft Company", ["DC-8"]),
    "DC-9": ("McDonnell Douglas", ["DC-9-30"]),
    "DH-82": ("de Havilland", ["DH-82"]),
    "DHC-1": ("de Havilland", ["DHC-1"]),
    "DHC-6": ("de Havilland", ["DHC-6"]),
    "DHC-8": ("de Havilland", ["DHC-8-100", "DHC-8-300"]),
    "DR-400": ("Robin", ["DR-400"]),
    "Dornier 328": ("Dornier", ["Dornier 328"]),
    "EMB-120": ("Embraer", ["EMB-120"]),
    "Embraer E-Jet": ("Embraer", ["E-170", "E-190", "E-195"]),
    "Embraer ERJ 145": ("Embraer", ["ERJ 135", "ERJ 145"]),
    "Embraer Legacy 600": ("Embraer", ["Embraer Legacy 600"]),
    "Eurofighter Typhoon": ("Eurofighter", ["Eurofighter Typhoon"]),
    "F-16": ("Lockheed Martin", ["F-16A/B"]),
    "F/A-18": ("McDonnell Douglas", ["F/A-18"]),
    "Falcon 2000": ("Dassault Aviation", ["Falcon 2000"]),
    "Falcon 900": ("Dassault Aviation", ["Falcon 900"]),
    "Fokker 100": ("Fokker", ["Fokker 100"]),
    "Fokker 50": ("Fokker", ["Fokker 50"]),
    "Fokker 70": ("Fokker", ["Fokker 70"]),
    "Global Express": ("Bombardier Aerospace", ["Global Express"]),
    "Gulfstream": ("Gulfstream Aerospace", ["Gulfstream IV", "Gulfstream V"]),
    "Hawk T1": ("British Aerospace", ["Hawk T1"]),
    "Il-76": ("Ilyushin", ["Il-76"]),
    "King Air": ("Beechcraft", ["King Air"]),
    "L-1011": ("Lockheed Corporation", ["L-1011"]),
    "MD-11": ("McDonnell Douglas", ["MD-11"]),
    "MD-80": ("McDonnell Douglas", ["MD-80", "MD-87"]),
    "MD-90": ("McDonnell Douglas", ["MD-90"]),
    "Metroliner": ("Fairchild", ["Metroliner"]),
    "PA-28": ("Piper", ["PA-28"]),
    "SR-20": ("Cirrus Aircraft", ["SR-20"]),
    "Saab 2000": ("Saab", ["Saab 2000"]),
    "Saab 340": ("Saab", ["Saab 340"]),
    "Spitfire": ("Supermarine", ["Spitfire"]),
    "Tornado": ("Panavia", ["Tornado"]),
    "Tu-134": ("Tupolev", ["Tu-134"]),
    "Tu-154": ("Tupolev", ["Tu-154"]),
    "Yak-42": ("Yakovlev", ["Yak-42"]),
}

# 20 held-out variants (families and manufacturers at assorted depths end up
# as the mapped evaluation labels): 7 from multi-variant families, 5 breaking
# two-variant families, 8 sole variants of their family
HELD_OUT = [
    "727-200", "737-200", "737-500", "747-100", "767-400", "A321",
    "A340-500", "A380", "BAE 146-300", "CRJ-900", "Cessna 560", "DC-3",
    "DC-8", "DC-9-30", "DC-10", "DHC-8-100", "E-195", "Fokker 70",
    "MD-87", "MD-90",
]


def main():
    manufacturers = sorted({mfr for mfr, _ in FAMILIES.values()})
    nodes = [{"id": 0, "name": "aircraft", "parent": None}]
    # names repeat across levels (a single-variant family often shares its
    # variant's name), so each level keeps its own id map
    mfr_ids, fam_ids, var_ids = {}, {}, {}
    next_id = 1
    for mfr in manufacturers:
        mfr_ids[mfr] = next_id
        nodes.append({"id": next_id, "name": mfr, "parent": 0})
        next_id += 1
    for fam in sorted(FAMILIES):
        mfr, _ = FAMILIES[fam]
        fam_ids[fam] = next_id
        nodes.append({"id": next_id, "name": fam, "parent": mfr_ids[mfr]})
        next_id += 1
    for fam in sorted(FAMILIES):
        for var in sorted(FAMILIES[fam][1]):
            var_ids[var] = next_id
            nodes.append({"id": next_id, "name": var, "parent": fam_ids[fam]})
            next_id += 1

    variants = [v for _, vs in FAMILIES.values() for v in vs]
    assert len(variants) == len(set(variants)) == 100, len(variants)
    assert len(FAMILIES) == 70
    assert len(manufacturers) == 30
    assert len(nodes) == 201

    out = Path(__file__).resolve().parent.parent / "src" / "treeood" / "data"
    out.mkdir(parents=True, exist_ok=True)
    (out / "fgvc_aircraft_hierarchy.json").write_text(
        json.dumps({"nodes": nodes}, indent=1) + "\n")
    (out / "fgvc_aircraft_ood_split.json").write_text(
        json.dumps({"ood_roots": sorted(var_ids[v] for v in HELD_OUT)}, indent=1) + "\n")
    print(f"wrote {len(nodes)} nodes, {len(HELD_OUT)} held-out variants -> {out}")


if __name__ == "__main__":
    main()
