"""liftemp - lifted versus reversible tempering experiments"""
__version__ = "0.1.0"
