import sys

from csanitize.cli import main

sys.exit(main())
