"""Heat and Riesz kernels."""
