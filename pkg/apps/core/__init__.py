# Shared utilities: errors, run-config files, seeding
