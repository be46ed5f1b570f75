import sys

from sharevalue.main import main

sys.exit(main())
