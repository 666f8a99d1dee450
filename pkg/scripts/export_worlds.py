#!/usr/bin/env python
"""Write the built-in worlds as PGM/YAML map pairs."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from explorer.deps import configure_logging, get_settings
from explorer.grid_map import save_map
from explorer.worlds import WORLDS

logger = logging.getLogger(__name__)


def main() -> None:
    """Export every registered world under ``<output_root>/worlds``."""
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=None)
    args = parser.parse_args()

    configure_logging()
    out_dir = args.out_dir or Path(get_settings().output_root) / "worlds"
    out_dir.mkdir(parents=True, exist_ok=True)

    for name, factory in WORLDS.items():
        grid = factory()
        save_map(grid, out_dir / f"{name}.pgm", out_dir / f"{name}.yaml")
        logger.info("Wrote %s (%dx%d cells)", name, grid.width, grid.height)


if __name__ == "__main__":
    main()
