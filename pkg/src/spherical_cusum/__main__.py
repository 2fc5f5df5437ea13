import sys

from spherical_cusum.cli import main

sys.exit(main())
