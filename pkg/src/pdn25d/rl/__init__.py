"""Two-phase decap optimization with PPO: state encoding, environments, training."""
