import sys

from cfvcran.cli import main

sys.exit(main())
