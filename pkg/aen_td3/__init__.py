"""Decentralized two-arm lifting with action estimation networks and TD3."""

__version__ = "0.1.0"
__author__ = "aen-td3 contributors"
