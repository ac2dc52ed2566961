import sys

from coopaoa.cli import main

sys.exit(main())
