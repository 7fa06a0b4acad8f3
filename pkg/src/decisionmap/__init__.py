"""Decision maps for probabilistic classifiers.

Embeds data with a classifier-aware metric, learns an inverse projection,
pushes a regular 2D grid back through the classifier, and renders the
entropy-shaded decision landscape.
"""

from . import (  # noqa: F401
    classifier,
    datasets,
    delaunay,
    embedding,
    errors,
    evaluation,
    fisher_metric,
    inverse_map,
    pipeline,
    render,
)

# .app (the HTTP service) is imported lazily by the CLI; importing it here
# would pull fastapi into every numerical use of the package

__version__ = "0.1.0"
