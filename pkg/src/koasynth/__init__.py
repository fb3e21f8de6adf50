"""Bidirectional temporal-state synthesis for knee-osteoarthritis radiographs.

Preprocess radiographs, train a cycle-consistent generator pair that projects
images toward earlier or later disease stages, validate the transforms by
attacking a staged-disease classifier, and inspect everything with saliency,
Grad-CAM and embedding tooling.
"""

__version__ = "0.1.0"
