"""Bundled scenario files; load them by name via the simulate or cli modules."""
