class ExtractionError(Exception):
    """A problem that must stop an extraction run (bad bbox, missing image, bad weights)."""
