"""Monte Carlo engines for the uniform law and the maximal inequality."""
