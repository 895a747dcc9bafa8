# Persistence, caching and output helpers
