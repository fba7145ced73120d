"""Low-light image enhancement via Retinex decomposition and light-curve estimation."""
