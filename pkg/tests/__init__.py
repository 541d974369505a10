# -*- coding: utf-8 -*-
"""Tests pour classroom-kd."""
