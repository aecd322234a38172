"""Shipped environment presets, one JSON file per environment (fields of ``EnvironmentPreset``)."""
