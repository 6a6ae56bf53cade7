"""
Pydantic schemas for configuration records and reports.
"""
