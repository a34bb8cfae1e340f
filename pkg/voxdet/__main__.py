import sys

from voxdet.cli import main

sys.exit(main())
