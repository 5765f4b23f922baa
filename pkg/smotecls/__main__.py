import sys

from smotecls.cli import main

sys.exit(main())
