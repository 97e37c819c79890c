import sys

from vsdg.cli import main

sys.exit(main())
