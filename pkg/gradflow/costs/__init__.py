# -*- coding: utf-8 -*-

# gradflow: continuous-time proportional-integral distributed optimization
#   (c) 2026-present : gradflow developers
