import sys

from bmposterior.experiments.cli import main

sys.exit(main())
