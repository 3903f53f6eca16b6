# rsoup/ - rewarded-soup lab: fine-tune one expert per reward, then interpolate weights
# Entry point: python -m rsoup <command> --config configs/pointmass.yaml

__version__ = "0.1.0"
