"""Classification over encodings and firing-type analysis.

Trains one-vs-rest separators on Bag-of-Elements encodings of a train split
and scores a held-out split generated with a fresh patch seed (same planted
concepts). Then categorizes detections against tri-label pixel masks into
scene-context, object-context, and ground-truth firings.
"""

import numpy as np

from mdpm import MiningConfig, SynthSpec, build_database, generate_dataset, mine_rules
from mdpm.context import FiringType, PixelMasks, classify_firing, element_firing_type, overlap_ratios
from mdpm.elements import build_inverted_index, retrieve_element
from mdpm.encode import encode_boe
from mdpm.featstore import PatchGeometry
from mdpm.learn import accuracy, train_ovr
from mdpm.lda import ensemble_merge, estimate_background, score_element, train_lda

spec = SynthSpec(dim=64, categories=3, images_per_category=60, seed=0)
train_store, truth = generate_dataset(spec)
test_store, _ = generate_dataset(SynthSpec(**{**spec.__dict__, "seed": 1}))

detectors = []
for cat in range(spec.categories):
    db = build_database(train_store, k=8, target_category=cat)
    patterns = mine_rules(db, MiningConfig(supp_min=0.01, conf_min=0.6))
    index = build_inverted_index(db)
    elements = [retrieve_element(p, index, db, train_store) for p in patterns]
    bg = [i for i, r in enumerate(train_store.records) if r.class_label != cat]
    stats = estimate_background(train_store.activations(bg), 0.01)
    scores = []
    for e in elements:
        det = train_lda(train_store.activations(e.members), stats)
        scores.append(score_element(train_store.activations(e.members), det))
    _, dets = ensemble_merge(elements, train_store, stats, th=0.5 * min(scores))
    detectors.extend(dets)
print(f"{len(detectors)} detectors over {spec.categories} categories")


def encode(store):
    rows, labels = [], []
    for image_id, positions in sorted(store.image_index.items()):
        recs = [store.records[i] for i in positions]
        enc = encode_boe([[(r.activation, r.geometry) for r in recs]],
                         detectors, [(256, 256)], categories=spec.categories)
        rows.append(enc.vector)
        labels.append(recs[0].class_label)
    return np.stack(rows), np.array(labels)


x_train, y_train = encode(train_store)
x_test, y_test = encode(test_store)
model = train_ovr(x_train, y_train, reg_grid=(0.01, 0.1, 1.0), folds=5)
print(f"held-out accuracy: {accuracy(model, x_test, y_test):.3f} (chance 0.333)")

# firing types: a mask whose left half is the target object
labels = np.zeros((100, 100), dtype=np.uint8)
labels[:, :50] = 1
masks = PixelMasks(labels)
for box in (PatchGeometry(5, 5, 30, 30), PatchGeometry(60, 60, 30, 30),
            PatchGeometry(35, 35, 30, 30)):
    ratios = overlap_ratios(box, masks)
    print(f"box at ({box.x},{box.y}): ratios "
          f"gt={float(ratios[0]):.2f} ot={float(ratios[1]):.2f} sc={float(ratios[2]):.2f}"
          f" -> {classify_firing(ratios).value}")

votes = element_firing_type(
    [[(PatchGeometry(5, 5, 30, 30), 3.0)], [(PatchGeometry(10, 10, 30, 30), 2.5)]],
    [masks, masks], score_threshold=1.0)
print(f"element plurality vote: {votes.value}")
