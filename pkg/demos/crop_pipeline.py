"""Cropping originals to the lung box found at mask resolution.

Masks live at 128 px, originals at 512 px, so the box has to be carried
across scales before cropping. Then the crops are squared and resized
for a classifier.

    python demos/crop_pipeline.py
"""
import os
import tempfile

import numpy as np

from lungqa.geometry import classifier_prep, rescale_box, union_box
from lungqa.manifest import QaConfig, read_manifest
from lungqa.pipeline import run_crop
from lungqa.raster_io import binarize, load_gray
from lungqa.regions import label_regions
from lungqa.synthetic import make_dataset

work = tempfile.mkdtemp(prefix="lungqa_crop_")
entries = read_manifest(make_dataset(os.path.join(work, "data"), n=6, seed=1))

# one image by hand
e = entries[0]
mask = load_gray(e.mask_path)
orig = load_gray(e.image_path)
box = union_box(label_regions(binarize(mask)))
big = rescale_box(box, mask.width, mask.height, orig.width, orig.height)
print("mask", mask.shape, "box", box.as_tuple())
print("orig", orig.shape, "box", big.as_tuple())

# and the whole manifest, with a 5% margin
records = run_crop(entries, QaConfig(margin=0.05), os.path.join(work, "crops"))
for r in records:
    print(r.image_id, r.status, r.box)

crop0 = load_gray(records[0].output_path)
sq = classifier_prep(crop0, 224)
print("crop", crop0.shape, "-> classifier input", sq.shape, "mean", round(float(np.mean(sq.pixels)), 1))
