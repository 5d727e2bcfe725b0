#!/usr/bin/python3
# -*- coding: utf-8 -*-

"Provide a single source of information"

from datetime import date

__version__ = '0.3.0'
release_date = date(2026, 10, 19)
