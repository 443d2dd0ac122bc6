import sys

from edgedetect.cli import main

sys.exit(main())
