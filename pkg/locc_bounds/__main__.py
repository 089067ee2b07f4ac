"""Entry point for `python -m locc_bounds`"""

import sys

from locc_bounds.cli import main

if __name__ == "__main__":
    sys.exit(main())
