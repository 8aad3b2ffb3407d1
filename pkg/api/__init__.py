"""
FastAPI service: scenario runs and the run registry.
"""
