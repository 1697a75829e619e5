import sys

from robpca.harness.cli import main

sys.exit(main())
