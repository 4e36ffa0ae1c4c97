"""Entry point for python -m quantized_mimo."""

import sys

from .cli import main

sys.exit(main())
