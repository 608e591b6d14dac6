"""Monte Carlo checks of uniform limit theory for network-dependent data."""
