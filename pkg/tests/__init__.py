"""Test package for the Bell measurement optimizer"""
