import sys

from fgarch.cli import main

sys.exit(main())
