# Proposals package initialization
