import sys

from driftsquint.cli import main

sys.exit(main())
