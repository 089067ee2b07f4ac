"""Pydantic file formats"""
