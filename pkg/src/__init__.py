"""Simulation and bifurcation analysis of nonlinear multi-agent, multi-option opinion dynamics."""
