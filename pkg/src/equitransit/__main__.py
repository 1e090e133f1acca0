import sys

from equitransit.cli import main

sys.exit(main())
