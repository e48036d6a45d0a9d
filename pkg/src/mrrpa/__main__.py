import sys

from mrrpa.cli import main

sys.exit(main())
