"""Test suite for the bit string commitment simulator"""
