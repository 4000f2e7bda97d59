import sys

from kintraj.cli import main

sys.exit(main())
