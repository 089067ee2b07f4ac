"""Immutable domain values"""
