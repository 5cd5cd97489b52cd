"""FastAPI service exposing training, evaluation and experiment operations."""
