# hazsurf/smoke_tests/__main__.py
import sys

from .run_all_tests import main

sys.exit(main())
