import sys

from rlde.cli import main

sys.exit(main())
