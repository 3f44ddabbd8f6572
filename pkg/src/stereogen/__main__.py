import sys

from stereogen.cli import main

sys.exit(main())
