#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"Run the command line interface with python -m pefusion"

import sys

from pefusion import cli

sys.exit(cli.main())
