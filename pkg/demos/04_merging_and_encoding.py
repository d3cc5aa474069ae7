"""Ensemble merging and image encodings.

Redundant mined patterns describe the same planted concept; greedy ensemble
merging unites their elements and trains one detector per concept. The
detectors then drive Bag-of-Elements encodings (max response per pyramid
cell); Bag-of-Patterns encodings come straight from the patterns.
"""

import numpy as np

from mdpm import MiningConfig, SynthSpec, build_database, generate_dataset, mine_rules
from mdpm.elements import build_inverted_index, retrieve_element
from mdpm.encode import encode_boe, encode_bop
from mdpm.lda import ensemble_merge, estimate_background, score_element, train_lda

spec = SynthSpec(dim=64, categories=3, images_per_category=60, seed=0)
store, truth = generate_dataset(spec)
cat = 0
db = build_database(store, k=8, target_category=cat)
patterns = mine_rules(db, MiningConfig(supp_min=0.01, conf_min=0.6))
index = build_inverted_index(db)
elements = [retrieve_element(p, index, db, store) for p in patterns]
print(f"category {cat}: {len(elements)} redundant elements from {len(patterns)} patterns")

background = [i for i, r in enumerate(store.records) if r.class_label != cat]
stats = estimate_background(store.activations(background), shrinkage=0.01)

# calibrate the merge threshold between within-concept and cross-concept scores
def dominant_concept(element):
    votes = [truth.assignments[m] for m in element.members
             if truth.assignments[m] >= 0]
    return max(set(votes), key=votes.count)

concept_of = [dominant_concept(e) for e in elements]
within, cross = [], []
for i, e in enumerate(elements):
    det = train_lda(store.activations(e.members), stats)
    for j, other in enumerate(elements):
        s = score_element(store.activations(other.members), det)
        (within if concept_of[i] == concept_of[j] else cross).append(s)
th = (np.mean(within) + np.mean(cross)) / 2
merged, detectors = ensemble_merge(elements, store, stats, th)
print(f"merged into {len(merged)} groups at th={th:.1f}:")
for m in merged:
    print(f"  {len(m.sources)} source elements, {len(m.members)} patches, "
          f"coverage {m.coverage}")

# encode one image both ways
image_positions = store.image_index[0]
patches = [(store.records[i].activation, store.records[i].geometry)
           for i in image_positions]
boe = encode_boe([patches], detectors, [(256, 256)], categories=1)
bop = encode_bop(patches, patterns, 256, 256)
print(f"\nBoE encoding: {boe.vector.size} dims "
      f"({boe.channels} detectors x {boe.cells} cells), "
      f"level-0 block {np.round(boe.vector[:len(detectors)], 1)}")
print(f"BoP encoding: {bop.vector.size} dims "
      f"({bop.channels} patterns x {bop.cells} cells)")
