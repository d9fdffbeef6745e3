"""Corneal topography screening toolkit.

Library and CLI for classifying topography maps as healthy or
post-refractive-surgery: image preparation, symmetry/spectrum/pachymetry
features, a KNN classifier with reject option, sliding-window discrete
HMMs, a stagewise curve fitter, and a synthetic corpus generator with an
end-to-end evaluation harness.
"""

__version__ = "0.1.0"
