"""Versioned tables with branches, transactional pipelines and schema contracts.

Subpackages: ``catalog`` (content-addressed commits and branch refs),
``merge``, ``lang`` (the transformation language), ``contracts``, ``runs``
and ``model`` (the bounded model checker). The ``lakekit`` command lives in
``cli``.
"""

__version__ = "0.1.0"
