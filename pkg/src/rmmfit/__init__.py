"""Energy-based identification of relaxed micromorphic and related continua."""
