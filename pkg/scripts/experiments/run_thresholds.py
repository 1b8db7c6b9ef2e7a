"""Run the thresholds experiment. Flags as in run.py, e.g. python scripts/experiments/run_thresholds.py --config config/experiments/thresholds_gain.yaml"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from run import main

if __name__ == '__main__':
    sys.exit(main(['thresholds'] + sys.argv[1:]))
