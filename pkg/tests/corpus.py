"""Scenario corpus shared by the tracker and acceptance tests."""
from pathlib import Path

from pairtrack import simulator as sim

ROOT = Path(__file__).resolve().parents[1]
SCENARIO_DIR = ROOT / "scenarios"


def corpus():
    """(name, ScenarioSpec) pairs: bundled files plus seeded and noisy variants."""
    out = [(p.stem, sim.load_scenario(p)) for p in sorted(SCENARIO_DIR.glob("*.yaml"))]
    for seed in (1, 2, 3):
        out.append((f"parked_car@{seed}", sim.parked_car(seed=seed)))
        out.append((f"mixed_traffic@{seed}", sim.mixed_traffic(seed=seed)))
    out.append(("crossing_pedestrians_noisy", sim.crossing_pedestrians(sigma=0.1)))
    out.append(("moving_car_noisy", sim.moving_car(sigma=0.1)))
    out.append(("moving_car_fast", sim.moving_car(speed=25.0, sigma=0.05)))
    return out


def monotonicity_scenarios(n=20):
    presets = [sim.mixed_traffic, sim.parked_car, sim.crossing_pedestrians, sim.moving_car]
    out = []
    for i in range(n):
        fn = presets[i % len(presets)]
        out.append((f"{fn.__name__}@{i}", fn(seed=i)))
    return out
