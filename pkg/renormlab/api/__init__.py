# Run configuration and report schemas
