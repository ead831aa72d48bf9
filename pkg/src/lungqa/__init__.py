"""Quality control for chest x-ray lung segmentation masks."""
__version__ = "0.1.0"
