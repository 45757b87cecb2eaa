import os
import sys

# make the shared oracle helpers importable regardless of pytest import mode
sys.path.insert(0, os.path.dirname(__file__))
