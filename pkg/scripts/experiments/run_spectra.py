"""Run the spectra experiment. Flags as in run.py, e.g. python scripts/experiments/run_spectra.py --config config/experiments/spectra.yaml"""
import sys
from pathlib import Path

project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from run import main

if __name__ == '__main__':
    sys.exit(main(['spectra'] + sys.argv[1:]))
