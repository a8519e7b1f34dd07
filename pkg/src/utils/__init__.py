# Utilities: errors, config validation, artifact export
