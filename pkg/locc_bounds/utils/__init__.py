"""Utility helper functions"""
