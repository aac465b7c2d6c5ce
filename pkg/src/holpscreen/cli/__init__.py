"""Command-line front end: configs, ingestion, campaign runner, figures."""
