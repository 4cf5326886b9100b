import sys
from pathlib import Path

# Make sibling test modules importable (shared fixture helpers).
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
