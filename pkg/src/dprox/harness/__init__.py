"""Configuration, experiment orchestration, property checks and the CLI."""
