# hazsurf/__main__.py
# to run python -m hazsurf <command> ...

import sys

from .cli import main

sys.exit(main())
