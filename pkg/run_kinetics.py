#!/usr/bin/env python3
"""
Run reaction-graph scenarios and compare radical-pair reaction operators.

Usage examples:
    python run_kinetics.py simulate --config configs/standard_rp_coherence.json --output-dir outputs
    python run_kinetics.py rates --ks 1e6 --kt 1e4 --measured 6e5
    python run_kinetics.py validate --config configs/standard_rp_stepwise.json

See coherent_kinetics/cli.py for the full option list and exit codes.
"""

import sys

from coherent_kinetics.cli import main

if __name__ == "__main__":
    sys.exit(main())
