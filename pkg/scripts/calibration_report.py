#!/usr/bin/env python3
"""Compare generator output against the published dataset statistics.

Targets: ~12.08 follow edges per user, 16.74% fake labels, mean cascade
size 2.79, and ~91% of a cascade's first-day tweets within 7 hours.
"""
import argparse

from cascade_gnn.synthgen import (GenConfig, generate_dataset,
                                  generate_social_graph, summary_stats)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--urls", type=int, default=300)
    ap.add_argument("--users", type=int, default=10_000)
    args = ap.parse_args()

    cfg = GenConfig(seed=args.seed, num_urls=args.urls, num_users=args.users)
    social = generate_social_graph(cfg)
    stories, cascades = generate_dataset(cfg, social)
    stats = summary_stats(stories, cascades)

    ratio = len(social.follows) / cfg.num_users
    print(f"{'statistic':<28}{'generated':>12}{'target':>10}")
    print(f"{'follow edges per user':<28}{ratio:>12.2f}{12.08:>10.2f}")
    print(f"{'fake label fraction':<28}{stats.fake_fraction:>12.4f}{0.1674:>10.4f}")
    print(f"{'mean cascade size':<28}{stats.mean_cascade_size:>12.3f}{2.79:>10.2f}")
    print(f"{'7h cascade coverage':<28}{stats.coverage_by_hour[7.0]:>12.4f}{0.91:>10.2f}")
    print()
    top = min(15, len(stats.url_cumulative_share))
    print(f"cascades held by top {top} URLs: {stats.share_at_rank(top):.1%}")
    sizes = sorted(stats.cascade_size_histogram.items())
    print("cascade-size histogram (head):",
          ", ".join(f"{k}:{v}" for k, v in sizes[:10]))


if __name__ == "__main__":
    main()
