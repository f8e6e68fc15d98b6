# Copyright (C) 2025-2026 The ksflow developers
#
# This file is part of ksflow
#
# It is subject to the license terms in the LICENSE file found in the top-level
# directory of this distribution.
#
# No part of ksflow, including this file, may be copied, modified,
# propagated, or distributed except according to the terms contained in the
# LICENSE file.

import sys

from ksflow.cli import main

sys.exit(main())
