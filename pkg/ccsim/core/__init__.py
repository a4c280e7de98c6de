"""Core Domain Layer

Combinatorics, entities and exceptions shared by every service.
"""
