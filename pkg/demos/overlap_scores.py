"""IoU and Dice between two segmentations of the same image."""
import numpy as np

from lungqa.overlap import overlap, overlap_counts
from lungqa.raster_io import BitMask
from lungqa.synthetic import ellipse

shape = (128, 128)
truth = BitMask(ellipse(shape, 40, 64, 18, 40) | ellipse(shape, 88, 64, 18, 38))
# a prediction that is shifted a little and misses the bottom of one lobe
pred_bits = np.roll(truth.bits, 3, axis=1)
pred_bits[95:, :64] = False
pred = BitMask(pred_bits)

c = overlap_counts(pred, truth)
print("pred", c.pred, "truth", c.truth, "intersection", c.intersection, "union", c.union)
s = overlap(pred, truth)
print(f"iou {s.iou:.4f}  dice {s.dice:.4f}")
print("dice from iou:", round(2 * s.iou / (1 + s.iou), 4))

# two empty masks agree perfectly by convention
empty = BitMask(np.zeros(shape, bool))
print("empty vs empty:", overlap(empty, empty))
