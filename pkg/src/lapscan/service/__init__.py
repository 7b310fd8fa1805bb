"""HTTP service wrapping the toolkit."""
