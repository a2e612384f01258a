import sys

from hjpicard.cli import main

sys.exit(main())
