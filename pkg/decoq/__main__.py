import sys

from decoq.cli import main

sys.exit(main())
