"""egeopt: match enhanced speech to clean speech on perceptual acoustic parameters.

The toolkit has three layers:

* a non-differentiable oracle that measures voice-quality descriptors
  (jitter, shimmer, harmonics-to-noise ratio, spectral shape) per frame and
  aggregates them into an utterance-level functional vector,
* a small reverse-mode autodiff engine plus a convolutional estimator that
  predicts the same functional vector from a magnitude spectrogram, and
* a mask-based enhancer whose training loss can be augmented with the
  squared distance between estimated functionals of enhanced speech and
  oracle functionals of clean speech.

Everything is seeded and deterministic so full pipeline runs are
byte-reproducible.
"""

__version__ = "0.1.0"
