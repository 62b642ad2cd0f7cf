"""Prompt-program virtual machine."""
