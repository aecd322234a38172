"""JSON schema of CLI scenario configs."""
