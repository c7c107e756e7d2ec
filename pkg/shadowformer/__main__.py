import sys

from shadowformer.main import main

sys.exit(main())
