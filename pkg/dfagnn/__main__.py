import sys

from dfagnn.run import main

sys.exit(main())
