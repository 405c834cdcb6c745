import sys

from quditmc.cli import main

sys.exit(main())
