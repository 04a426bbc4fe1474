# Keeps the tests directory importable (oracles.py) regardless of rootdir.
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))
