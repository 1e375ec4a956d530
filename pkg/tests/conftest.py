import sys
from pathlib import Path

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"

if str(ROOT / "src") not in sys.path:
    sys.path.insert(0, str(ROOT / "src"))
