"""Vectorize a pool with deterministic TF-IDF and split it with k-means.

Run: python3 demos/01_featurize_and_cluster.py
"""

from algen import featurize
from algen.cluster import assign, kmeans_fit
from algen.corpus import Instance, Pool

texts = [
    "feeling hopeless and alone again",
    "hopeless thoughts keep coming back",
    "is this rash something to worry about",
    "rash spreading on my arm since yesterday",
    "can my landlord keep the deposit",
    "landlord refuses to return my deposit",
]
pool = Pool("U", [Instance(id=f"d{i}", text=t) for i, t in enumerate(texts)])

print("== Fit a vocabulary on the pool ==")
vocab = featurize.fit(pool)
print(f"{len(vocab)} terms, indexed lexicographically; df('rash') = {vocab.df[vocab.index['rash']]}")

print("\n== Transform: sparse, L2-normalized rows ==")
vec = featurize.transform(vocab, texts[0])
print(f"first doc: {len(vec.indices)} non-zeros, norm = {vec.norm:.9f}")

print("\n== Distances reflect topical overlap ==")
v0, v1, v2 = (featurize.transform(vocab, texts[i]) for i in (0, 1, 2))
print(f"same topic     d(v0, v1) = {featurize.distance(v0, v1):.4f}")
print(f"different one  d(v0, v2) = {featurize.distance(v0, v2):.4f}")

print("\n== k-means recovers the three topics ==")
matrix = featurize.matrix(vocab, texts)
clustering = kmeans_fit(matrix, m=3, seed=1, ids=pool.ids())
for instance in pool:
    print(f"  cluster {clustering.assignment[instance.id]}  {instance.text}")
print(f"inertia: {clustering.inertia:.4f} (history: {[round(x, 3) for x in clustering.inertia_history]})")

probe = featurize.transform(vocab, "another deposit question for my landlord")
print(f"\nnew text lands in cluster {assign(clustering, probe)}")
