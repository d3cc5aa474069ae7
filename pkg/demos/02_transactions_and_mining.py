"""Transactions and association-rule mining on a five-transaction database.

The classic market-basket example: four items, five transactions. Support
and confidence come out as exact count ratios, and the miner returns every
pattern beating both strict thresholds.
"""

import numpy as np

from mdpm import MiningConfig, confidence, mine_rules, support, top_k_indices
from mdpm.transact import Transaction, TransactionDatabase, binarize_topk, sparsify_topk

# items 1..4 over dim 5; every transaction is a positive (class item 5)
rows = [(3, 4), (1, 2, 4), (1, 4), (1, 3, 4), (1, 2, 3, 4)]
db = TransactionDatabase.from_transactions(
    5, 4, [Transaction(items, 5) for items in rows], target_category=0)

print(f"support({{1,4}})        = {support(db, (1, 4))}")        # 4 of 5
print(f"confidence({{1,4}}->3)  = {confidence(db, (1, 4), 3)}")  # 2 of 4

cfg = MiningConfig(supp_min=0.55, conf_min=0.9, min_len=1, max_len=3)
print(f"\npatterns with supp > {cfg.supp_min}, conf > {cfg.conf_min}:")
for p in mine_rules(db, cfg):
    print(f"  {p.items}: supp={p.support:.2f} conf={p.confidence:.2f}")

# transactions come from the top-K positive activation dimensions
activation = np.array([0.0, 3.2, 0.0, 0.4, 5.1, 0.0, 1.8, 0.0])
print(f"\nactivation             {activation.tolist()}")
print(f"top-3 item set         {top_k_indices(activation, 3)}")
print(f"sparsified (k=3)       {sparsify_topk(activation, 3).tolist()}")
print(f"binarized  (k=3)       {binarize_topk(activation, 3).tolist()}")
