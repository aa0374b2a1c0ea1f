"""Learning dense saliency from several noisy handcrafted labellers.

A small fully-convolutional predictor and a per-pixel Gaussian noise model
are optimized in alternating rounds; no ground truth is used for training.
"""
__version__ = "0.1.0"
