# Standard Library
import sys

# Local Library
from .cli import main

sys.exit(main())
