# Baselines package initialization
