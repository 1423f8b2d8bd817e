import sys

from qpwm.cli import main

sys.exit(main())
