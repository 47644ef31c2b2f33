# -----------------------------------------------------------------------------
# Copyright (c) 2026, setid developers
#
# All rights reserved.
# -----------------------------------------------------------------------------

import logging

logger = logging.getLogger("setid")

__version__ = "0.1.0"
