#!/usr/bin/env python3
"""
Entry point for the convergence-study command line.
"""
import sys

from nsfem.main import main

if __name__ == "__main__":
    sys.exit(main())
