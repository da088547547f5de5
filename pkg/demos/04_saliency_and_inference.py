#!/usr/bin/env python3
"""From reference embedding to mask: probability, saliency, fusion, argmax.

A reference embedding scores pixels with a sigmoid of its dot product
against the dense features, which for unit vectors lives in the narrow
band [sigma(-1), sigma(1)] ~ [0.269, 0.731]. Text saliency sharpens the
map through a Hadamard product, and the argmax over concepts produces
the final mask (ties go to the first concept in the list).
"""

import numpy as np

from reco import (
    ConceptSpec,
    DenseFeatureMap,
    ProjectionMatrix,
    ReferenceEmbedding,
    ValueFeatureMap,
    argmax_mask,
    concept_probability,
    dense_saliency,
    fuse,
    threshold_mask,
)

rng = np.random.default_rng(1)
d, h, w = 8, 4, 6

object_dir = np.zeros(d); object_dir[0] = 1.0
context_dir = np.zeros(d); context_dir[1] = 1.0

feats = np.empty((d, h, w))
for y in range(h):
    for x in range(w):
        owner = object_dir if x < 3 else context_dir
        noisy = owner + 0.15 * rng.standard_normal(d)
        feats[:, y, x] = noisy / np.linalg.norm(noisy)
fmap = DenseFeatureMap(data=feats, image_id="scene")

ref = ReferenceEmbedding(vector=object_dir, concept_name="thing")
prob = concept_probability(ref, fmap)
print("probability map (left half is the object):")
print(np.array2string(prob.values, precision=2))

# DenseCLIP-style saliency from value features and the final projection
values = ValueFeatureMap(data=feats.copy(), image_id="scene")
proj = ProjectionMatrix(data=np.eye(d))
concept = ConceptSpec(name="thing", text_embedding=object_dir)
sal = dense_saliency(values, proj, concept)
print("saliency map:")
print(np.array2string(sal.values, precision=2))

fused = fuse(prob, sal)
print(f"fusion never raises a pixel: "
      f"{(fused.values <= np.minimum(prob.values, sal.values)).all()}")

# two-concept argmax mask
other = ReferenceEmbedding(vector=context_dir, concept_name="context")
other_prob = concept_probability(other, fmap)
mask = argmax_mask([fused, other_prob])
print("argmax mask (0=thing, 1=context):")
print(mask.indices)

binary = threshold_mask(fused, 0.5)
print("single-concept mask at threshold 0.5:")
print(binary.indices)
