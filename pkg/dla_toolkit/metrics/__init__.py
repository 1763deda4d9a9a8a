# Metrics package initialization
