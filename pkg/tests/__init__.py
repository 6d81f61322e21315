# Test Module
