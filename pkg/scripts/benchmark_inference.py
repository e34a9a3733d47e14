"""Single-threaded generator throughput at the full configuration."""

import argparse

from singgan.config import EngineConfig, desk_config
from singgan.experiments import benchmark_inference


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seconds", type=float, default=1.0)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--desk", action="store_true")
    args = ap.parse_args()
    cfg = desk_config() if args.desk else EngineConfig()
    sps = benchmark_inference(args.seconds, args.repeats, cfg)
    print(f"samples_per_second={sps:.0f}")
    print(f"realtime_factor={cfg.sample_rate / sps:.3f}")


if __name__ == "__main__":
    main()
