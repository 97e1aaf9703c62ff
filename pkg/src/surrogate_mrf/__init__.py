"""Joint estimation and prediction in discrete MRFs with a convex variational surrogate."""
