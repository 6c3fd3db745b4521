"""Random potentials, pair interactions and Hamiltonian assembly."""
