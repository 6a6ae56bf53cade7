import sys

from nqlab.main import main

sys.exit(main())
