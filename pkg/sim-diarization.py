#!/usr/bin/env python3
"""
Diarization Simulation Script

Simulates conversations in a speaker-embedding world, diarizes them with
spectral clustering with and without style-controllable augmentation, and
scores the result against the simulated reference.
"""

import sys
import os

# Add current directory to Python path for imports
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from simulator import main

if __name__ == "__main__":
    sys.exit(main())
