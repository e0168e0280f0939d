import sys

from ragcritic.cli import main

sys.exit(main())
